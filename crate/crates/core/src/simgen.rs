// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded generators for the benchmark simulation designs. Every design
//! returns a series together with its true change points (1-based, the
//! last index before each change).

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, StandardNormal, StudentT};
use serde::Serialize;

use crate::error::{CpdError, Result};
use crate::metric::{Metric, Observation};

const DIM: usize = 3;
const GARCH_BURN_IN: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    Normal,
    StudentT3,
    Cauchy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Design {
    /// `X_t = ε_t`.
    Iid { noise: Noise },
    /// `X_t = 0.5ε_t + 0.5ε_{t-1}`.
    Ma1 { noise: Noise },
    /// Per-coordinate GARCH(1,1): `σ²_t = 0.02 + 0.02σ²_{t-1} + 0.05X²_{t-1}`.
    Garch { noise: Noise },
    /// `X, Y, X` blocks; `Y` adds `(μ, μ, μ)`.
    MeanShift { noise: Noise, ma: bool },
    /// `X, Y, X` blocks; `Y` multiplies by `σ`.
    ScaleShift { noise: Noise, ma: bool },
    /// `X, Y, X` blocks of a diagonal CCC-GARCH(1,1) whose parameters
    /// switch between regimes.
    CccGarch { noise: Noise },
    /// Angle blocks drawn from the listed arc mixtures (indices into [`arcs`]).
    Circular { blocks: &'static [usize] },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExampleTemplate {
    pub id: &'static str,
    pub summary: &'static str,
    pub design: Design,
    /// Name of the selectable parameter (`mu`, `sigma`, `case`), if any.
    pub parameter: Option<&'static str>,
    pub menu: &'static [f64],
    pub metric: Metric,
}

impl ExampleTemplate {
    pub fn changepoint_count(&self) -> usize {
        match self.design {
            Design::Iid { .. } | Design::Ma1 { .. } | Design::Garch { .. } => 0,
            Design::MeanShift { .. } | Design::ScaleShift { .. } | Design::CccGarch { .. } => 2,
            Design::Circular { blocks } => blocks.windows(2).filter(|w| w[0] != w[1]).count(),
        }
    }
}

const MU: &[f64] = &[4.0, 6.0, 8.0];
const SIGMA: &[f64] = &[3.0, 5.0, 7.0];
const SIGMA_CAUCHY: &[f64] = &[9.0, 16.0, 25.0];
const CASES: &[f64] = &[1.0, 2.0, 3.0];

fn template(
    id: &'static str,
    summary: &'static str,
    design: Design,
    parameter: Option<(&'static str, &'static [f64])>,
) -> ExampleTemplate {
    let metric = if matches!(design, Design::Circular { .. }) {
        Metric::Circular
    } else {
        Metric::Euclidean
    };
    ExampleTemplate {
        id,
        summary,
        design,
        parameter: parameter.map(|p| p.0),
        menu: parameter.map_or(&[], |p| p.1),
        metric,
    }
}

/// The full catalog of designs.
pub fn list_examples() -> Vec<ExampleTemplate> {
    use Design::*;
    use Noise::*;
    vec![
        template(
            "4.1.1",
            "iid N(0, I3), no change",
            Iid { noise: Normal },
            None,
        ),
        template("4.1.2", "iid t3, no change", Iid { noise: StudentT3 }, None),
        template(
            "4.1.3",
            "iid Cauchy, no change",
            Iid { noise: Cauchy },
            None,
        ),
        template(
            "4.1.4",
            "MA(1) with N(0, I3) innovations, no change",
            Ma1 { noise: Normal },
            None,
        ),
        template(
            "4.1.5",
            "MA(1) with t3 innovations, no change",
            Ma1 { noise: StudentT3 },
            None,
        ),
        template(
            "4.1.6",
            "GARCH(1,1) with N(0, I3) innovations, no change",
            Garch { noise: Normal },
            None,
        ),
        template(
            "4.1.7",
            "GARCH(1,1) with t3 innovations, no change",
            Garch { noise: StudentT3 },
            None,
        ),
        template(
            "4.1.8",
            "MA(1) normal, mean shift mu in the middle block",
            MeanShift {
                noise: Normal,
                ma: true,
            },
            Some(("mu", MU)),
        ),
        template(
            "4.1.9",
            "MA(1) t3, mean shift mu in the middle block",
            MeanShift {
                noise: StudentT3,
                ma: true,
            },
            Some(("mu", MU)),
        ),
        template(
            "4.1.10",
            "iid Cauchy, mean shift mu in the middle block",
            MeanShift {
                noise: Cauchy,
                ma: false,
            },
            Some(("mu", MU)),
        ),
        template(
            "4.1.11",
            "MA(1) normal, scale sigma in the middle block",
            ScaleShift {
                noise: Normal,
                ma: true,
            },
            Some(("sigma", SIGMA)),
        ),
        template(
            "4.1.12",
            "MA(1) t3, scale sigma in the middle block",
            ScaleShift {
                noise: StudentT3,
                ma: true,
            },
            Some(("sigma", SIGMA)),
        ),
        template(
            "4.1.13",
            "iid Cauchy, scale sigma in the middle block",
            ScaleShift {
                noise: Cauchy,
                ma: false,
            },
            Some(("sigma", SIGMA_CAUCHY)),
        ),
        template(
            "4.1.14",
            "CCC-GARCH(1,1) normal, parameter case in the middle block",
            CccGarch { noise: Normal },
            Some(("case", CASES)),
        ),
        template(
            "4.1.15",
            "CCC-GARCH(1,1) t3, parameter case in the middle block",
            CccGarch { noise: StudentT3 },
            Some(("case", CASES)),
        ),
        template(
            "4.2.1",
            "uniform angles on [0, 4pi), no change",
            Circular { blocks: &[4, 4, 4] },
            None,
        ),
        template(
            "4.2.2",
            "arc mixtures P1 then P3",
            Circular { blocks: &[0, 2] },
            None,
        ),
        template(
            "4.2.3",
            "arc mixtures P1, P3, P2",
            Circular { blocks: &[0, 2, 1] },
            None,
        ),
        template(
            "4.2.4",
            "arc mixtures P1, P3, P2, P4",
            Circular {
                blocks: &[0, 2, 1, 3],
            },
            None,
        ),
    ]
}

/// The half-open intervals whose union each circular law is uniform on.
pub fn arcs(k: usize) -> &'static [(f64, f64)] {
    const P: [&[(f64, f64)]; 5] = [
        &[(-PI / 6.0, PI / 6.0), (11.0 * PI / 6.0, 13.0 * PI / 6.0)],
        &[(PI / 3.0, 2.0 * PI / 3.0), (7.0 * PI / 3.0, 8.0 * PI / 3.0)],
        &[
            (5.0 * PI / 6.0, 7.0 * PI / 6.0),
            (17.0 * PI / 6.0, 19.0 * PI / 6.0),
        ],
        &[
            (4.0 * PI / 3.0, 5.0 * PI / 3.0),
            (10.0 * PI / 3.0, 11.0 * PI / 3.0),
        ],
        &[(0.0, 4.0 * PI)],
    ];
    P[k]
}

/// One concrete draw request.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExampleSpec {
    pub id: String,
    pub n: usize,
    pub m: usize,
    /// 1-based row of the design's parameter menu; `None` means row 1.
    pub param: Option<usize>,
    pub seed: u64,
}

impl ExampleSpec {
    pub fn new(id: &str, seed: u64) -> Self {
        Self {
            id: id.to_string(),
            n: 40,
            m: 40,
            param: None,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Simulated {
    pub observations: Vec<Observation>,
    pub changepoints: Vec<usize>,
    pub metric: Metric,
}

impl Simulated {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

fn draw(noise: Noise, rng: &mut ChaCha8Rng) -> f64 {
    match noise {
        Noise::Normal => StandardNormal.sample(rng),
        Noise::StudentT3 => StudentT::new(3.0)
            .expect("valid degrees of freedom")
            .sample(rng),
        Noise::Cauchy => Cauchy::new(0.0, 1.0).expect("valid scale").sample(rng),
    }
}

fn draw_vec(noise: Noise, rng: &mut ChaCha8Rng) -> [f64; DIM] {
    [0; DIM].map(|_| draw(noise, rng))
}

/// Block lengths `X, Y, X` (or `X, Y, X, Y` for four circular blocks).
fn block_lengths(blocks: usize, n: usize, m: usize) -> Vec<usize> {
    (0..blocks)
        .map(|b| if b % 2 == 0 { n } else { m })
        .collect()
}

fn boundaries(lengths: &[usize]) -> Vec<usize> {
    lengths[..lengths.len() - 1]
        .iter()
        .scan(0, |acc, &len| {
            *acc += len;
            Some(*acc)
        })
        .collect()
}

/// Regime (block index) of every time point.
fn regimes(lengths: &[usize]) -> Vec<usize> {
    lengths
        .iter()
        .enumerate()
        .flat_map(|(b, &len)| std::iter::repeat_n(b, len))
        .collect()
}

fn coords(v: [f64; DIM]) -> Observation {
    Observation::Coords(v.to_vec())
}

/// Innovations form one stream across regimes, so the moving average at a
/// boundary mixes the last innovation of the previous block.
fn moving_average(
    regime: &[usize],
    noise: Noise,
    rng: &mut ChaCha8Rng,
    ma: bool,
    shift: impl Fn(usize, [f64; DIM]) -> [f64; DIM],
) -> Vec<Observation> {
    let mut prev = if ma { draw_vec(noise, rng) } else { [0.0; DIM] };
    regime
        .iter()
        .map(|&r| {
            let e = draw_vec(noise, rng);
            let base = if ma {
                std::array::from_fn(|c| 0.5 * e[c] + 0.5 * prev[c])
            } else {
                e
            };
            prev = e;
            coords(shift(r, base))
        })
        .collect()
}

fn garch(len: usize, noise: Noise, rng: &mut ChaCha8Rng) -> Vec<Observation> {
    let mut sigma2: [f64; DIM] = [0.02 / (1.0 - 0.02 - 0.05); DIM];
    let mut x_prev = [0.0; DIM];
    let mut out = Vec::with_capacity(len);
    for t in 0..GARCH_BURN_IN + len {
        let e = draw_vec(noise, rng);
        let mut x = [0.0; DIM];
        for c in 0..DIM {
            sigma2[c] = 0.02 + 0.02 * sigma2[c] + 0.05 * x_prev[c] * x_prev[c];
            x[c] = sigma2[c].sqrt() * e[c];
        }
        x_prev = x;
        if t >= GARCH_BURN_IN {
            out.push(coords(x));
        }
    }
    out
}

struct CccParams {
    omega: [f64; DIM],
    a: [f64; DIM],
    b: [f64; DIM],
}

fn ccc_params(case: Option<usize>) -> CccParams {
    let base = CccParams {
        omega: [0.01; DIM],
        a: [0.02, 0.03, 0.01],
        b: [0.02, 0.02, 0.05],
    };
    let Some(case) = case else { return base };
    // case k scales (ω, A, B) by (k + 1, k + 3, k + 4)
    let k = case as f64;
    CccParams {
        omega: base.omega.map(|v| v * (k + 1.0)),
        a: base.a.map(|v| v * (k + 3.0)),
        b: base.b.map(|v| v * (k + 4.0)),
    }
}

fn ccc_garch(
    regime: &[usize],
    case: usize,
    noise: Noise,
    rng: &mut ChaCha8Rng,
) -> Vec<Observation> {
    let x = ccc_params(None);
    let y = ccc_params(Some(case));
    let mut sigma2: [f64; DIM] = std::array::from_fn(|c| x.omega[c] / (1.0 - x.a[c] - x.b[c]));
    let mut e_prev = [0.0; DIM];
    let mut out = Vec::with_capacity(regime.len());
    let burn = std::iter::repeat_n(0usize, GARCH_BURN_IN);
    for (t, r) in burn.chain(regime.iter().copied()).enumerate() {
        let p = if r % 2 == 1 { &y } else { &x };
        let e = draw_vec(noise, rng);
        let mut v = [0.0; DIM];
        for c in 0..DIM {
            sigma2[c] = p.omega[c] + p.a[c] * e_prev[c] * e_prev[c] + p.b[c] * sigma2[c];
            v[c] = sigma2[c].sqrt() * e[c];
        }
        e_prev = e;
        if t >= GARCH_BURN_IN {
            out.push(coords(v));
        }
    }
    out
}

fn uniform_on_arcs(k: usize, rng: &mut ChaCha8Rng) -> f64 {
    let pieces = arcs(k);
    let (lo, hi) = pieces[rng.random_range(0..pieces.len())];
    rng.random_range(lo..hi)
}

pub fn find_template(id: &str) -> Result<ExampleTemplate> {
    list_examples()
        .into_iter()
        .find(|t| t.id == id)
        .ok_or_else(|| CpdError::invalid_input(format!("unknown example id {id:?}")))
}

/// Draws the series described by `spec`.
pub fn gen_example(spec: &ExampleSpec) -> Result<Simulated> {
    let tpl = find_template(&spec.id)?;
    if spec.n == 0 || spec.m == 0 {
        return Err(CpdError::invalid_input(
            "block sizes n and m must be positive",
        ));
    }
    let value = match (tpl.parameter, spec.param) {
        (_, None) => tpl.menu.first().copied(),
        (Some(_), Some(row)) if (1..=tpl.menu.len()).contains(&row) => Some(tpl.menu[row - 1]),
        (Some(name), Some(row)) => {
            return Err(CpdError::invalid_input(format!(
                "{} has {} {name} rows; got row {row}",
                tpl.id,
                tpl.menu.len()
            )))
        }
        (None, Some(_)) => {
            return Err(CpdError::invalid_input(format!(
                "{} takes no parameter",
                tpl.id
            )));
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let blocks = match tpl.design {
        Design::Circular { blocks } => blocks.len(),
        _ => 3,
    };
    let lengths = block_lengths(blocks, spec.n, spec.m);
    let regime = regimes(&lengths);
    let len = regime.len();

    let observations = match tpl.design {
        Design::Iid { noise } => moving_average(&regime, noise, &mut rng, false, |_, v| v),
        Design::Ma1 { noise } => moving_average(&regime, noise, &mut rng, true, |_, v| v),
        Design::Garch { noise } => garch(len, noise, &mut rng),
        Design::MeanShift { noise, ma } => {
            let mu = value.expect("mean-shift designs have a menu");
            moving_average(&regime, noise, &mut rng, ma, |r, v| {
                if r == 1 {
                    v.map(|x| x + mu)
                } else {
                    v
                }
            })
        }
        Design::ScaleShift { noise, ma } => {
            let s = value.expect("scale-shift designs have a menu");
            moving_average(&regime, noise, &mut rng, ma, |r, v| {
                if r == 1 {
                    v.map(|x| x * s)
                } else {
                    v
                }
            })
        }
        Design::CccGarch { noise } => {
            let case = value.expect("GARCH designs have a menu") as usize;
            ccc_garch(&regime, case, noise, &mut rng)
        }
        Design::Circular { blocks } => regime
            .iter()
            .map(|&r| Observation::Angle(uniform_on_arcs(blocks[r], &mut rng)))
            .collect(),
    };

    let changepoints = match tpl.design {
        Design::Circular { blocks } => boundaries(&lengths)
            .into_iter()
            .zip(blocks.windows(2))
            .filter(|(_, w)| w[0] != w[1])
            .map(|(b, _)| b)
            .collect(),
        _ if tpl.changepoint_count() == 0 => Vec::new(),
        _ => boundaries(&lengths),
    };
    Ok(Simulated {
        observations,
        changepoints,
        metric: tpl.metric,
    })
}
