//! Column layouts of the CSV outputs and the top-level keys of the JSON
//! summaries. Bump [`SCHEMA_VERSION`] on any change.

use serde::Serialize;

use super::config::ExperimentKind;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Int,
    /// Decimal, `inf` or `NaN`.
    Float,
    /// `0` or `1`.
    Bool,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Column {
    pub name: &'static str,
    #[serde(rename = "type")]
    pub kind: ColumnType,
    pub description: &'static str,
}

const fn col(name: &'static str, kind: ColumnType, description: &'static str) -> Column {
    Column {
        name,
        kind,
        description,
    }
}

use ColumnType::{Bool, Float, Int, Text};

const SAMPLE_PREFIX: [Column; 4] = [
    col("replica", Int, "replica index; its stream id"),
    col("sample", Int, "measurement index within the replica"),
    col("t", Int, "chain time of the measurement"),
    col("rng_position", Int, "generator word position when measured"),
];

const ISOLATION: [Column; 4] = [
    col("pivotal_count", Int, "|P_t|"),
    col("interface_count", Int, "|I_t|"),
    col("pivotal_empty", Bool, "P_t is empty"),
    col("max_isolation", Float, "max over e in P_t of d(e, Λ^c ∪ P_t∖{e}); NaN when P_t is empty"),
];

const LOCALIZATION: [Column; 6] = [
    col("pivotal_count", Int, "|P_t|"),
    col("interface_count", Int, "|I_t|"),
    col("empty", Bool, "P_t ∪ I_t is empty"),
    col("localization", Float, "max over e in P_t ∪ I_t of d(e, Λ^c ∪ P_t∖{e}); NaN when empty"),
    col("proxy_cut_distance", Float, "cut-distance proxy: max over e in I_t of max(d(e, S⁺), d(e, S⁻)), with S⁺/S⁻ standing in for the set of all cuts; NaN when I_t is empty"),
    col("s_plus_count", Int, "|S⁺_t|"),
];

const SPEED: [Column; 12] = [
    col("replica", Int, "replica index; its stream id"),
    col("window", Int, "window index within the replica"),
    col("t", Int, "window centre time"),
    col("rng_position", Int, "generator word position at time t"),
    col("pivotal_count", Int, "|P_t|"),
    col("d_h_max", Float, "max over 1 ≤ s ≤ N_E of d_H^0(P_t, P_{t+s})"),
    col("argmax_s", Int, "smallest s attaining d_h_max"),
    col("d_h_max_trimmed", Float, "max over 1 ≤ s ≤ N_E of d_H^ℓ(P_t, P_{t+s}) with ℓ = 2d ln|Λ|"),
    col("d_h_union", Float, "d_H^0 between the unions of P_r over [t−W, t] and over [t, t+W]"),
    col("d_h_union_trimmed", Float, "as d_h_union with ℓ = 2d·window_c·ln|Λ|"),
    col("union_past_count", Int, "size of the union of P_r over [t−W, t]"),
    col("union_future_count", Int, "size of the union of P_r over [t, t+W]"),
];

const EMPTY_PIVOTAL: [Column; 3] = [
    col("pivotal_count", Int, "|P_t|"),
    col("interface_count", Int, "|I_t|"),
    col("pivotal_empty", Bool, "P_t is empty"),
];

const STP_VALIDITY: [Column; 13] = [
    col("replica", Int, "replica index; its stream id"),
    col("trial", Int, "trial index within the replica"),
    col("t", Int, "start time of the path"),
    col("s", Int, "target time"),
    col("edge", Int, "start edge, pivotal at t"),
    col("constructor", Text, "`decreasing` (closed in Y) or `impatient`"),
    col("status", Text, "`pass`, `fail` or `skipped`"),
    col("outcome", Text, "`reached`, `boundary_exit`, or empty when no path was returned"),
    col("path_len", Int, "number of time-edges; 0 when no path"),
    col("time_changes", Int, "number of time changes"),
    col("space_length", Int, "length of the space projection"),
    col("rng_position", Int, "generator word position at time t"),
    col("reason", Text, "why a trial failed or was skipped; empty on pass"),
];

/// Columns of the CSV written for `kind`.
pub fn columns(kind: ExperimentKind) -> Vec<Column> {
    let with_prefix = |rest: &[Column]| SAMPLE_PREFIX.iter().chain(rest).copied().collect();
    match kind {
        ExperimentKind::Isolation => with_prefix(&ISOLATION),
        ExperimentKind::Localization => with_prefix(&LOCALIZATION),
        ExperimentKind::EmptyPivotal => with_prefix(&EMPTY_PIVOTAL),
        ExperimentKind::Speed => SPEED.to_vec(),
        ExperimentKind::StpValidity => STP_VALIDITY.to_vec(),
    }
}

pub fn header(kind: ExperimentKind) -> Vec<&'static str> {
    columns(kind).iter().map(|c| c.name).collect()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SummaryKey {
    pub key: &'static str,
    pub description: &'static str,
}

const fn key(key: &'static str, description: &'static str) -> SummaryKey {
    SummaryKey { key, description }
}

const SUMMARY_COMMON: [SummaryKey; 12] = [
    key("experiment", "experiment name"),
    key("schema_version", "version of these layouts"),
    key("code_version", "crate version that produced the file"),
    key("config", "normalized configuration"),
    key("lattice", "{d, L, vertex_count, edge_count}"),
    key("log_volume", "ln|Λ| with |Λ| the vertex count"),
    key("burn_in_steps", "steps discarded before measuring, per replica"),
    key("records", "number of CSV rows"),
    key("regime", "{parameter: (1−p)·α(d), out_of_regime: parameter ≥ 1}"),
    key("stationarity", "per-replica first-half vs second-half comparison of |P|; `flagged` when any replica has |z| > 3"),
    key("rng", "{algorithm, seed, seed_rule}"),
    key("csv", "name of the CSV written next to the summary"),
];

/// Proportions are `{count, n, estimate, ci_low, ci_high}` with 95% Wilson
/// intervals; quantiles carry distribution-free 95% order-statistic bounds.
pub fn summary_keys(kind: ExperimentKind) -> Vec<SummaryKey> {
    let specific: &[SummaryKey] = match kind {
        ExperimentKind::Isolation => &[
            key("tail", "[{threshold, count, n, estimate, ci_low, ci_high}]: P̂(∃e ∈ P: isolation ≥ ℓ) over ell_grid"),
            key("reference_curve", "[{threshold, value}]: (α(d)(1−p))^{ℓ/(2d)}"),
            key("tail_at_4_ln_volume", "tail proportion at ℓ = 4 ln|Λ|"),
            key("empty_fraction", "proportion of samples with P empty"),
        ],
        ExperimentKind::Localization => &[
            key("quantiles", "{p50, p90, p99}: {value, ci_low, ci_high} of the localization statistic over nonempty samples"),
            key("tail_log", "tail proportions at thresholds c·ln|Λ|, c in ell_grid"),
            key("tail_log2", "tail proportions at thresholds c·ln²|Λ|, c in ell_grid"),
            key("proxy_quantiles", "{p50, p90, p99} of proxy_cut_distance"),
            key("empty_fraction", "proportion of samples with P ∪ I empty"),
        ],
        ExperimentKind::Speed => &[
            key("threshold", "2d·ln|Λ|"),
            key("exceed", "proportion of windows with d_h_max > threshold"),
            key("exceed_trimmed", "proportion of windows with d_h_max_trimmed > threshold"),
            key("union_threshold", "2d·window_c·ln|Λ|"),
            key("union_exceed", "proportion of windows with d_h_union > union_threshold"),
            key("tail", "tail proportions of d_h_max over ell_grid"),
            key("lag_curve", "[{lag, mean, infinite, exceed}] of d_H^0(P_t, P_{t+s}) at each lag"),
            key("window", "W in steps"),
        ],
        ExperimentKind::EmptyPivotal => &[key("empty_fraction", "proportion of samples with P empty")],
        ExperimentKind::StpValidity => &[
            key("decreasing", "{passed, failed, skipped, pass_rate}"),
            key("impatient", "{passed, failed, skipped, pass_rate}"),
            key("skip_reasons", "{reason: count}"),
            key("failures", "[{constructor, t, s, edge, reason, path, events}] with events covering ]s, t]"),
        ],
    };
    SUMMARY_COMMON.iter().chain(specific).copied().collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentSchema {
    pub experiment: &'static str,
    pub schema_version: u32,
    pub csv_file: &'static str,
    pub columns: Vec<Column>,
    pub summary_file: &'static str,
    pub summary_keys: Vec<SummaryKey>,
}

/// Everything `emit-schema` prints.
pub fn all_schemas() -> Vec<ExperimentSchema> {
    ExperimentKind::ALL
        .into_iter()
        .map(|k| ExperimentSchema {
            experiment: k.as_str(),
            schema_version: SCHEMA_VERSION,
            csv_file: "{prefix}_{d}d_L{L}_p{p}_seed{seed}.csv",
            columns: columns(k),
            summary_file: "{prefix}_{d}d_L{L}_p{p}_seed{seed}.json",
            summary_keys: summary_keys(k),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_names_are_unique() {
        for k in ExperimentKind::ALL {
            let mut h = header(k);
            let n = h.len();
            h.sort_unstable();
            h.dedup();
            assert_eq!(h.len(), n, "{k}");
        }
    }
}
