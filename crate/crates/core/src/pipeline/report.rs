// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write;

use super::{plots, read_json, read_quadrants, Pipeline, Step, Subcommand};
use crate::attribution::AttributionSet;
use crate::consensus::ConsensusTable;
use crate::error::Result;
use crate::evaluate::{AblationRow, EvalSummary, ExpansionReport, IpaCheck, MeanSd, SensitivityRow};
use crate::labeler::residual_table;
use crate::phonoclust::CognateTestResult;

fn pm(v: Option<MeanSd>) -> String {
    v.map(|m| format!("{:.3} ± {:.3}", m.mean, m.sd)).unwrap_or_else(|| "n/a".into())
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_else(|| "n/a".into())
}

fn signed(v: Option<f64>) -> String {
    v.map(|x| format!("{x:+.3}")).unwrap_or_else(|| "n/a".into())
}

fn missing(md: &mut String, cmd: Subcommand) {
    log::warn!("report: no {cmd} output; section skipped");
    let _ = writeln!(md, "_Not available; run `lexstrata {cmd}`._\n");
}

pub(super) fn run(p: &Pipeline, step: &mut Step) -> Result<()> {
    let labeled = p.labeled(step)?;
    let mut md = String::new();
    let _ = writeln!(md, "# Analysis report\n");
    let _ = writeln!(md, "Seed {}; config hash `{}`.\n", p.cfg.seed, &p.config_hash[..12]);

    let t1 = residual_table(&labeled);
    let _ = writeln!(md, "## Table 1. Residual rate by language\n");
    let _ = writeln!(md, "| Language | Total | Has cognacy | Loans | Rescued | Residual | % Residual |");
    let _ = writeln!(md, "|---|---:|---:|---:|---:|---:|---:|");
    for r in &t1.rows {
        let _ = writeln!(
            md,
            "| {} | {} | {} ({:.0}%) | {} | {} | {} | {:.1}% |",
            r.language_id, r.total, r.coded, 100.0 * r.coverage, r.loans, r.rescued, r.residual, r.residual_pct
        );
    }
    let _ = writeln!(md, "| Mean | | | | | | {:.1}% |\n", t1.mean_residual_pct);

    let ablation: Option<Vec<AblationRow>> = step.optional("ablation.json")?.map(|x| read_json(&x)).transpose()?;
    let cv: Option<EvalSummary> = step.optional("cv_summary.json")?.map(|x| read_json(&x)).transpose()?;
    let _ = writeln!(md, "## Table 2. Cross-validated performance\n");
    let cv_rows: Vec<(String, &EvalSummary)> = match (&ablation, &cv) {
        (Some(rows), _) => rows.iter().map(|r| (r.variant.to_string(), &r.cv)).collect(),
        (None, Some(s)) => vec![(s.spec.variant.to_string(), s)],
        (None, None) => vec![],
    };
    if cv_rows.is_empty() {
        missing(&mut md, Subcommand::Cv);
    } else {
        let _ = writeln!(md, "| Variant | Model | Splits | AUC | F1 | Macro F1 | Accuracy |");
        let _ = writeln!(md, "|---|---|---:|---|---|---|---|");
        for (v, s) in &cv_rows {
            let _ = writeln!(
                md,
                "| {v} | {} | {} | {} | {} | {} | {} |",
                s.model,
                s.split_count(),
                pm(s.auc),
                pm(s.f1),
                pm(s.macro_f1),
                pm(s.accuracy)
            );
        }
        md.push('\n');
    }

    let _ = writeln!(md, "## Table 3. Leave-one-language-out\n");
    match step.optional("lolo_summary.json")?.map(|x| read_json::<EvalSummary>(&x)).transpose()? {
        None => missing(&mut md, Subcommand::Lolo),
        Some(s) => {
            let _ = writeln!(md, "| Held-out language | Forms | Positives | AUC | F1 |");
            let _ = writeln!(md, "|---|---:|---:|---:|---:|");
            for r in &s.splits {
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {} | {:.3} |",
                    r.language.as_deref().unwrap_or("?"),
                    r.n_test,
                    r.n_positive,
                    opt(r.auc, 3),
                    r.metrics.f1
                );
            }
            let _ = writeln!(md, "| Mean | | | {} | |\n", pm(s.auc));
        }
    }

    let _ = writeln!(md, "## Table 4. Feature ablation\n");
    match &ablation {
        None => missing(&mut md, Subcommand::Ablate),
        Some(rows) => {
            let _ = writeln!(md, "| Variant | Features | CV AUC | Δ CV | LOLO AUC | Δ LOLO |");
            let _ = writeln!(md, "|---|---:|---|---:|---:|---:|");
            for r in rows {
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {} | {} | {} |",
                    r.variant,
                    r.cv.spec.feature_names().len(),
                    pm(r.cv.auc),
                    signed(r.delta_cv_auc),
                    opt(r.lolo.mean_auc(), 3),
                    signed(r.delta_lolo_auc)
                );
            }
            md.push('\n');
        }
    }
    if let Some(rows) = step.optional("sensitivity.json")?.map(|x| read_json::<Vec<SensitivityRow>>(&x)).transpose()? {
        let _ = writeln!(md, "Drop-one-language sensitivity:\n");
        let _ = writeln!(md, "| Dropped | Forms removed | CV AUC without | Δ AUC |");
        let _ = writeln!(md, "|---|---:|---:|---:|");
        for r in &rows {
            let _ = writeln!(md, "| {} | {} | {} | {} |", r.dropped, r.n_dropped, opt(r.reduced_auc, 3), signed(r.delta_auc));
        }
        md.push('\n');
    }
    if let Some(c) = step.optional("ipa_check.json")?.map(|x| read_json::<IpaCheck>(&x)).transpose()? {
        let _ = writeln!(
            md,
            "IPA rerun: {} of {} forms change under digraph conversion; CV AUC {} (orthographic {}), Δ {}.\n",
            c.altered_forms,
            labeled.len(),
            opt(c.ipa.mean_auc(), 3),
            opt(c.orthographic.mean_auc(), 3),
            signed(c.delta_auc)
        );
    }

    let expansion: Option<ExpansionReport> = step.optional("expansion.json")?.map(|x| read_json(&x)).transpose()?;
    let _ = writeln!(md, "## Table 5. Expansion languages\n");
    match &expansion {
        None => missing(&mut md, Subcommand::Expand),
        Some(r) => {
            let _ = writeln!(md, "| Group | Languages | Forms | Rule residual % | Predicted % | Mean p | Mean AUC |");
            let _ = writeln!(md, "|---|---:|---:|---:|---:|---:|---:|");
            for g in &r.groups {
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {:.1} | {:.1} | {:.3} | {} |",
                    g.group, g.languages, g.n_forms, g.mean_rule_pct, g.mean_predicted_pct, g.mean_probability, opt(g.mean_auc, 3)
                );
            }
            md.push('\n');
        }
    }

    let _ = writeln!(md, "## Consensus\n");
    match step.optional("consensus.json")?.map(|x| read_json::<ConsensusTable>(&x)).transpose()? {
        None => missing(&mut md, Subcommand::Consensus),
        Some(t) => {
            let c = t.counts;
            let _ = writeln!(
                md,
                "CS {} · CA {} · RO {} · MO {} (threshold {}); Cohen's κ = {}.\n",
                c.cs, c.ca, c.ro, c.mo, t.threshold, opt(t.kappa, 3)
            );
        }
    }

    let _ = writeln!(md, "## Clustering and cognate test\n");
    match step.optional("cluster.json")?.map(|x| read_json::<serde_json::Value>(&x)).transpose()? {
        None => missing(&mut md, Subcommand::Cluster),
        Some(v) => {
            let _ = writeln!(
                md,
                "{} CS forms; best Ward silhouette {} at k = {}; best DBSCAN noise fraction {}.\n",
                v["n"],
                opt(v["ward_best_silhouette"].as_f64(), 3),
                v["ward_best_k"],
                opt(v["dbscan_best"]["noise_fraction"].as_f64(), 3)
            );
        }
    }
    let cognate: Option<CognateTestResult> = step.optional("cognate_test.json")?.map(|x| read_json(&x)).transpose()?;
    match &cognate {
        None => missing(&mut md, Subcommand::CognateTest),
        Some(r) => {
            let _ = writeln!(
                md,
                "Cognate test over {} concepts: observed {:.4}, null {:.4} ± {:.4}, p = {:.3}.\n",
                r.concepts.len(),
                r.observed,
                r.null_mean,
                r.null_sd,
                r.p_value
            );
        }
    }

    // Plots.
    let seed = p.cfg.seed;
    let mut written = Vec::new();
    let shap: Option<AttributionSet> = step.optional("shap.json")?.map(|x| read_json(&x)).transpose()?;
    let svgs = [
        ("plots/attribution_beeswarm.svg", Subcommand::Shap, shap.as_ref().and_then(|s| plots::beeswarm(s, 12, seed))),
        (
            "plots/consensus_quadrants.svg",
            Subcommand::Consensus,
            match step.optional("quadrants.csv")? {
                Some(path) => {
                    let pts: Vec<_> = read_quadrants(&path)?.into_values().collect();
                    plots::quadrant_scatter(&pts, p.cfg.consensus.threshold, seed)
                }
                None => None,
            },
        ),
        (
            "plots/null_distribution.svg",
            Subcommand::CognateTest,
            cognate.as_ref().and_then(|r| plots::null_histogram(&r.null, r.observed, 30)),
        ),
        ("plots/expansion_bars.svg", Subcommand::Expand, expansion.as_ref().and_then(plots::expansion_bars)),
    ];
    for (name, cmd, svg) in svgs {
        match svg {
            Some(s) => {
                step.write(name, s.as_bytes())?;
                written.push(name);
            }
            None => log::warn!("plot {name} skipped: no usable {cmd} output"),
        }
    }
    if !written.is_empty() {
        let _ = writeln!(md, "## Figures\n");
        for name in &written {
            let _ = writeln!(md, "![{name}]({name})");
        }
        md.push('\n');
    }
    step.write("report.md", md.as_bytes())?;
    step.note("plots", &written);
    Ok(())
}
