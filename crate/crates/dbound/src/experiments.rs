//! Trade-off charts between protocols and the tolerance/threshold optimizer.

use std::fmt;
use std::str::FromStr;

use dbound_core::adversaries::Strategy;
use dbound_core::analytics;
use dbound_core::baselines::{memory_bits, ProtocolId, ResponderSpec};
use dbound_core::noise::NoiseModel;
use dbound_core::scenario::{NoiseLegs, Role};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simkit::{substream, Engine, Estimate, ExperimentConfig};
use crate::text;

/// Which evaluation of our protocol feeds the charts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OursCurve {
    /// The closed recursions (`analytics::mafia_success`, `analytics::distance_success`).
    #[default]
    Recursion,
    /// Exact success of the executable strategies.
    Strategy,
}

impl fmt::Display for OursCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OursCurve::Recursion => "recursion",
            OursCurve::Strategy => "strategy",
        })
    }
}

impl FromStr for OursCurve {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "recursion" => Ok(OursCurve::Recursion),
            "strategy" => Ok(OursCurve::Strategy),
            _ => Err(Error::Invalid(format!("curve source {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub n: usize,
    pub mafia: f64,
    pub distance: f64,
    pub memory_bits: u128,
}

/// Noiseless attack success for `n = 1..=n_max`; `None` where the protocol has
/// no instance with `n` rounds.
pub fn protocol_curve(
    p: ProtocolId,
    n_max: usize,
    ours: OursCurve,
) -> Result<Vec<Option<CurvePoint>>> {
    if n_max == 0 {
        return Err(dbound_core::Error::ZeroRounds.into());
    }
    let at_tree = match p {
        ProtocolId::At { depth: None } => analytics::at_tree_distance_table(n_max),
        ProtocolId::At { depth: Some(d) } => analytics::at_tree_distance_table(d),
        _ => Vec::new(),
    };
    let mut out = Vec::with_capacity(n_max);
    let (mafia_rows, distance_rows) = match (p, ours) {
        (ProtocolId::Ours, OursCurve::Recursion) => (
            analytics::mafia_table(n_max)?
                .iter()
                .map(|r| r.p_m)
                .collect(),
            analytics::distance_table(n_max)?
                .iter()
                .map(|r| r.p_d)
                .collect(),
        ),
        _ => (Vec::new(), Vec::new()),
    };
    for n in 1..=n_max {
        let Ok(spec) = ResponderSpec::new(p, n) else {
            out.push(None);
            continue;
        };
        let (mafia, distance) = match p {
            ProtocolId::Ours => match ours {
                OursCurve::Recursion => (mafia_rows[n - 1], distance_rows[n - 1]),
                OursCurve::Strategy => (
                    analytics::mafia_strategy_success(n)?,
                    analytics::distance_strategy_success(n)?,
                ),
            },
            ProtocolId::Hk => (analytics::hk_mafia(n), analytics::hk_distance(n)),
            ProtocolId::At { .. } => {
                let (d, l) = spec.tree_shape().expect("tree protocol");
                let tree = at_tree[d - 1];
                (analytics::at_mafia(d, l), tree.powi(l as i32))
            }
        };
        out.push(Some(CurvePoint {
            n,
            mafia,
            distance,
            memory_bits: memory_bits(&spec),
        }));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TradeoffCell {
    /// Mafia target `2^-a`.
    pub a: u32,
    /// Distance target `2^-b`.
    pub b: u32,
    #[serde(with = "opt_text")]
    pub winner: Option<ProtocolId>,
    pub rounds_needed: Option<usize>,
    pub memory_bits: Option<u128>,
}

mod opt_text {
    use dbound_core::baselines::ProtocolId;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<ProtocolId>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(p) => s.collect_str(p),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<ProtocolId>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// `p <= 2^-k`, with a relative slack for rounding in the recursions.
fn meets(p: f64, k: u32) -> bool {
    p <= (-(k as f64)).exp2() * (1.0 + 1e-12)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffParams {
    pub protocols: Vec<ProtocolId>,
    pub a_max: u32,
    pub b_max: u32,
    pub n_max: usize,
    /// Keep only instances with at most `cap * n` bits of fast-phase memory.
    pub memory_cap_per_round: Option<u128>,
    pub ours: OursCurve,
}

impl Default for TradeoffParams {
    fn default() -> Self {
        Self {
            protocols: vec![
                ProtocolId::Ours,
                ProtocolId::Hk,
                ProtocolId::AT_FULL,
                ProtocolId::AT3,
            ],
            a_max: 64,
            b_max: 64,
            n_max: 64,
            memory_cap_per_round: None,
            ours: OursCurve::Recursion,
        }
    }
}

/// For every target pair, the protocol needing the fewest rounds; ties go to
/// the smaller memory, then to the earlier protocol in the list.
pub fn tradeoff_chart(params: &TradeoffParams) -> Result<Vec<TradeoffCell>> {
    let mut curves = Vec::new();
    for &p in &params.protocols {
        let mut c = protocol_curve(p, params.n_max, params.ours)?;
        if let Some(cap) = params.memory_cap_per_round {
            for pt in c.iter_mut() {
                if pt.is_some_and(|pt| pt.memory_bits > cap * pt.n as u128) {
                    *pt = None;
                }
            }
        }
        curves.push((p, c));
    }
    let mut cells = Vec::with_capacity((params.a_max * params.b_max) as usize);
    for a in 1..=params.a_max {
        for b in 1..=params.b_max {
            let mut best: Option<(usize, u128, usize, ProtocolId)> = None;
            for (order, (p, curve)) in curves.iter().enumerate() {
                let hit = curve
                    .iter()
                    .flatten()
                    .find(|pt| meets(pt.mafia, a) && meets(pt.distance, b));
                if let Some(pt) = hit {
                    let key = (pt.n, pt.memory_bits, order, *p);
                    if best.is_none_or(|b| (key.0, key.1, key.2) < (b.0, b.1, b.2)) {
                        best = Some(key);
                    }
                }
            }
            cells.push(TradeoffCell {
                a,
                b,
                winner: best.map(|b| b.3),
                rounds_needed: best.map(|b| b.0),
                memory_bits: best.map(|b| b.1),
            });
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeRequest {
    #[serde(with = "text")]
    pub protocol: ProtocolId,
    pub n: usize,
    pub p_f: f64,
    pub p_b: f64,
    /// Upper bound on the false rejection ratio.
    pub delta: f64,
    pub trials: u64,
    pub master_seed: u64,
    #[serde(default, with = "text")]
    pub legs: NoiseLegs,
    /// Largest tolerance searched; defaults to `n`.
    #[serde(default)]
    pub x_max: Option<usize>,
    /// Largest pattern threshold searched; defaults to `n`.
    #[serde(default)]
    pub dl_max: Option<usize>,
}

impl OptimizeRequest {
    pub fn new(
        protocol: ProtocolId,
        n: usize,
        noise: NoiseModel,
        delta: f64,
        trials: u64,
        master_seed: u64,
    ) -> Self {
        Self {
            protocol,
            n,
            p_f: noise.p_f(),
            p_b: noise.p_b(),
            delta,
            trials,
            master_seed,
            legs: NoiseLegs::default(),
            x_max: None,
            dl_max: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub x: usize,
    /// Pattern threshold; `None` for protocols without the detector.
    pub dl: Option<usize>,
    pub security: Estimate,
    pub frr: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub request: OptimizeRequest,
    /// `None` when no searched cell meets the availability bound.
    pub best: Option<CellResult>,
    pub feasible_cells: usize,
    pub searched_cells: usize,
}

/// Exhaustive search over `(x, dl)` minimizing pre-ask mafia success subject
/// to the upper 95% bound of the false rejection ratio staying within `delta`.
///
/// Honest and adversarial sessions are simulated once each; every cell is read
/// off the resulting error histograms.
pub fn optimize(req: &OptimizeRequest, engine: &Engine) -> Result<OptimizationResult> {
    if !(req.delta > 0.0 && req.delta < 1.0) {
        return Err(Error::Invalid(format!(
            "availability bound {} outside (0, 1)",
            req.delta
        )));
    }
    let mut cfg = ExperimentConfig::new(req.protocol, req.n);
    cfg.p_f = req.p_f;
    cfg.p_b = req.p_b;
    cfg.trials = req.trials;
    cfg.legs = req.legs;
    cfg.adversary = Strategy::MafiaPreAsk;
    cfg.validate()?;
    let x_max = req.x_max.unwrap_or(req.n).min(req.n);
    let detector = req.protocol.has_detector();
    let dl_max = if detector {
        req.dl_max.unwrap_or(req.n).max(1)
    } else {
        1
    };

    let honest = engine.histograms(
        &cfg.scenario(Role::Honest)?,
        dl_max,
        req.trials,
        substream(req.master_seed, "honest"),
    )?;
    let attack = engine.histograms(
        &cfg.scenario(Role::Adversary(Strategy::MafiaPreAsk))?,
        dl_max,
        req.trials,
        substream(req.master_seed, "mafia"),
    )?;

    let mut best: Option<CellResult> = None;
    let mut feasible = 0;
    let mut searched = 0;
    for dl in 1..=dl_max {
        for x in 0..=x_max {
            searched += 1;
            let frr = Estimate::from_counts(req.trials - honest.at_most(dl, x), req.trials);
            if frr.ci95[1] > req.delta {
                continue;
            }
            feasible += 1;
            let security = Estimate::from_counts(attack.at_most(dl, x), req.trials);
            let cell = CellResult {
                x,
                dl: detector.then_some(dl),
                security,
                frr,
            };
            let key = |c: &CellResult| (c.security.successes, c.frr.successes, c.x, c.dl);
            if best.as_ref().is_none_or(|b| key(&cell) < key(b)) {
                best = Some(cell);
            }
        }
    }
    Ok(OptimizationResult {
        request: req.clone(),
        best,
        feasible_cells: feasible,
        searched_cells: searched,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig2a,
    Fig2b,
    Fig3a,
    Fig3b,
    Fig5a,
    Fig5b,
}

impl Figure {
    pub const ALL: [Figure; 6] = [
        Figure::Fig2a,
        Figure::Fig2b,
        Figure::Fig3a,
        Figure::Fig3b,
        Figure::Fig5a,
        Figure::Fig5b,
    ];
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Figure::Fig2a => "fig2a",
            Figure::Fig2b => "fig2b",
            Figure::Fig3a => "fig3a",
            Figure::Fig3b => "fig3b",
            Figure::Fig5a => "fig5a",
            Figure::Fig5b => "fig5b",
        })
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.to_string() == s)
            .ok_or_else(|| Error::UnknownFigure(s.into()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureParams {
    /// Rounds for the analytic curves and the charts.
    pub n_max: usize,
    /// Rounds for the noisy experiments.
    pub n_noisy: usize,
    pub trials: u64,
    pub master_seed: u64,
    pub delta: f64,
    pub ours: OursCurve,
}

impl Default for FigureParams {
    fn default() -> Self {
        Self {
            n_max: 64,
            n_noisy: 48,
            trials: 100_000,
            master_seed: 0,
            delta: 0.05,
            ours: OursCurve::Recursion,
        }
    }
}

/// Probabilities are written with six significant digits.
pub fn fmt_p(p: f64) -> String {
    format!("{p:.5e}")
}

/// Noise points `(p_f, p_b)` in steps of 0.005.
pub fn equal_noise_points() -> Vec<(f64, f64)> {
    (1..=10)
        .map(|k| (k as f64 * 0.005, k as f64 * 0.005))
        .collect()
}

pub fn split_noise_points() -> Vec<(f64, f64)> {
    (0..=10)
        .map(|k| (k as f64 * 0.005, (10 - k) as f64 * 0.005))
        .collect()
}

fn noisy_rows(
    points: &[(f64, f64)],
    params: &FigureParams,
    engine: &Engine,
    tag: &str,
) -> Result<Vec<Vec<String>>> {
    let mut rows = Vec::new();
    for (k, &(p_f, p_b)) in points.iter().enumerate() {
        let mut row = vec![format!("{p_f:.3}"), format!("{p_b:.3}")];
        for p in [ProtocolId::Ours, ProtocolId::Hk] {
            let seed = substream(params.master_seed, &format!("{tag}/{k}/{p}"));
            let req = OptimizeRequest::new(
                p,
                params.n_noisy,
                NoiseModel::new(p_f, p_b)?,
                params.delta,
                params.trials,
                seed,
            );
            let res = optimize(&req, engine)?;
            match res.best {
                Some(c) => row.extend([
                    fmt_p(c.security.mean),
                    c.x.to_string(),
                    c.dl.map_or(String::new(), |d| d.to_string()),
                    fmt_p(c.frr.mean),
                ]),
                None => row.extend([String::new(), String::new(), String::new(), String::new()]),
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// CSV text for one figure, header row first.
///
/// * fig2a / fig2b: `n,ours,ours_strategy,hk,naive` (mafia / distance success).
/// * fig3a / fig3b: `a,b,winner,rounds,memory_bits` over `2^-a` by `2^-b`
///   targets; fig3b keeps only instances within `5n` bits.
/// * fig5a / fig5b: optimized mafia security and the chosen cell per protocol,
///   `p_f,p_b,ours,ours_x,ours_dl,ours_frr,hk,hk_x,hk_dl,hk_frr`; fig5a sweeps
///   `p_f = p_b`, fig5b sweeps `p_f + p_b = 0.05`.
pub fn emit_figure_data(which: Figure, params: &FigureParams, engine: &Engine) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match which {
        Figure::Fig2a | Figure::Fig2b => {
            w.write_record(["n", "ours", "ours_strategy", "hk", "naive"])?;
            let ours = protocol_curve(ProtocolId::Ours, params.n_max, OursCurve::Recursion)?;
            let strat = protocol_curve(ProtocolId::Ours, params.n_max, OursCurve::Strategy)?;
            let hk = protocol_curve(ProtocolId::Hk, params.n_max, OursCurve::Recursion)?;
            for n in 1..=params.n_max {
                let pick = |c: &Vec<Option<CurvePoint>>| {
                    let pt = c[n - 1].expect("defined for every n");
                    if which == Figure::Fig2a {
                        pt.mafia
                    } else {
                        pt.distance
                    }
                };
                w.write_record([
                    n.to_string(),
                    fmt_p(pick(&ours)),
                    fmt_p(pick(&strat)),
                    fmt_p(pick(&hk)),
                    fmt_p(analytics::naive_bound(n)),
                ])?;
            }
        }
        Figure::Fig3a | Figure::Fig3b => {
            let tp = TradeoffParams {
                n_max: params.n_max,
                memory_cap_per_round: (which == Figure::Fig3b).then_some(5),
                ours: params.ours,
                ..TradeoffParams::default()
            };
            w.write_record(["a", "b", "winner", "rounds", "memory_bits"])?;
            for c in tradeoff_chart(&tp)? {
                w.write_record([
                    c.a.to_string(),
                    c.b.to_string(),
                    c.winner.map_or(String::new(), |p| p.to_string()),
                    c.rounds_needed.map_or(String::new(), |r| r.to_string()),
                    c.memory_bits.map_or(String::new(), |m| m.to_string()),
                ])?;
            }
        }
        Figure::Fig5a | Figure::Fig5b => {
            w.write_record([
                "p_f", "p_b", "ours", "ours_x", "ours_dl", "ours_frr", "hk", "hk_x", "hk_dl",
                "hk_frr",
            ])?;
            let (points, tag) = if which == Figure::Fig5a {
                (equal_noise_points(), "fig5a")
            } else {
                (split_noise_points(), "fig5b")
            };
            for row in noisy_rows(&points, params, engine, tag)? {
                w.write_record(row)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
