//! Tables and plot data from evaluated runs.

use std::fmt::Write as _;
use std::path::Path;

use emergelex_core::game::Variant;
use emergelex_core::metrics::build_word_modality_joint;
use emergelex_core::Modality;

use crate::config::ExperimentConfig;
use crate::eval::Trained;
use crate::pipeline::{load_report, load_state, load_trace, run_dir, write_file, VariantReport};
use crate::CliError;

fn cell(r: &VariantReport, key: &str) -> String {
    match r.summary.get(key) {
        Some(s) => format!("{:.3} ± {:.3}", s.mean, s.sd),
        None => "-".into(),
    }
}

struct Table {
    name: &'static str,
    title: &'static str,
    cols: Vec<(String, String)>,
}

fn tables() -> Vec<Table> {
    let per_mod = |prefix: &str, label: &str| -> Vec<(String, String)> {
        Modality::ALL
            .iter()
            .map(|m| (format!("{prefix}{}", m.short()), format!("{label}{}", m.short())))
            .collect()
    };
    let mut ari = per_mod("ari_a_", "A ");
    ari.extend(per_mod("ari_b_", "B "));
    let mut kappa = per_mod("kappa_", "κ_");
    kappa.push(("ear".into(), "EAR".into()));
    let mut mse = per_mod("mse_train_", "train ");
    mse.extend(per_mod("mse_test_", "test "));
    let mut welch = per_mod("welch_t_", "t_");
    welch.extend(per_mod("welch_p_", "p_"));
    vec![
        Table {
            name: "nmi",
            title: "Word-modality NMI",
            cols: vec![("nmi_a".into(), "Agent A".into()), ("nmi_b".into(), "Agent B".into())],
        },
        Table {
            name: "ari",
            title: "Categorization ARI",
            cols: ari,
        },
        Table {
            name: "agreement",
            title: "Word agreement",
            cols: kappa,
        },
        Table {
            name: "mse",
            title: "Interpersonal prediction MSE",
            cols: mse,
        },
        Table {
            name: "welch",
            title: "One-sided Welch test, test > train",
            cols: welch,
        },
    ]
}

pub fn render_markdown(reports: &[VariantReport]) -> String {
    let mut out = String::new();
    for t in tables() {
        let _ = writeln!(out, "## {}\n", t.title);
        let _ = writeln!(out, "| variant | {} |", t.cols.iter().map(|c| c.1.as_str()).collect::<Vec<_>>().join(" | "));
        let _ = writeln!(out, "|---|{}", "---|".repeat(t.cols.len()));
        for r in reports {
            let cells: Vec<String> = t.cols.iter().map(|(k, _)| cell(r, k)).collect();
            let _ = writeln!(out, "| {} | {} |", r.variant, cells.join(" | "));
        }
        out.push('\n');
    }
    let _ = writeln!(out, "## Seeds with p < 0.05\n");
    let _ = writeln!(out, "| variant | a | p | o | c |\n|---|---|---|---|---|");
    for r in reports {
        let counts: Vec<String> = Modality::ALL
            .iter()
            .map(|m| {
                let hit = r.seeds.iter().filter(|s| s.welch[*m].is_some_and(|w| w.p < 0.05)).count();
                format!("{hit}/{}", r.seeds.len())
            })
            .collect();
        let _ = writeln!(out, "| {} | {} |", r.variant, counts.join(" | "));
    }
    out
}

pub fn render_tsv(reports: &[VariantReport]) -> String {
    let mut out = String::from("table\tvariant\tmetric\tmean\tsd\tn\n");
    for t in tables() {
        for r in reports {
            for (k, _) in &t.cols {
                if let Some(s) = r.summary.get(k) {
                    let _ = writeln!(out, "{}\t{}\t{k}\t{}\t{}\t{}", t.name, r.variant, s.mean, s.sd, s.n);
                }
            }
        }
    }
    out
}

fn matrix_tsv(header: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = format!("word\t{}\n", header.join("\t"));
    for (w, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:.6}")).collect();
        let _ = writeln!(out, "{w}\t{}", cells.join("\t"));
    }
    out
}

/// Word-by-category matrices (and word-by-modality for naming-game agents)
/// plus the acceptance-rate trace of one run.
fn plot_data(cfg: &ExperimentConfig, variant: Variant, seed: u64, dir: &Path) -> Result<(), CliError> {
    let trained = load_state(&cfg.out, variant, seed)?.trained()?;
    match &trained {
        Trained::Csl { a, b, .. } => {
            for (tag, ag) in [("a", a), ("b", b)] {
                let header: Vec<String> = (0..ag.n_flat())
                    .map(|l| {
                        let (m, k) = ag.unflatten(l);
                        format!("{}{k}", m.short())
                    })
                    .collect();
                let rows: Vec<Vec<f64>> = (0..ag.vocab())
                    .map(|w| ag.theta().iter().map(|r| r[w]).collect())
                    .collect();
                write_file(&dir.join(format!("theta_word_category_{tag}.tsv")), &matrix_tsv(&header, &rows))?;
                let joint = build_word_modality_joint(ag)?;
                let header: Vec<String> = Modality::ALL.iter().map(|m| m.short().to_string()).collect();
                let rows: Vec<Vec<f64>> = (0..joint.rows())
                    .map(|w| (0..joint.cols()).map(|c| joint.get(w, c)).collect())
                    .collect();
                write_file(&dir.join(format!("theta_word_modality_{tag}.tsv")), &matrix_tsv(&header, &rows))?;
            }
        }
        Trained::H2h { a, b } => {
            for (tag, ag) in [("a", a), ("b", b)] {
                let header: Vec<String> = (0..ag.n_categories()).map(|l| format!("c{l}")).collect();
                let rows: Vec<Vec<f64>> = (0..ag.vocab())
                    .map(|w| (0..ag.n_categories()).map(|l| ag.theta(l)[w]).collect())
                    .collect();
                write_file(&dir.join(format!("theta_word_category_{tag}.tsv")), &matrix_tsv(&header, &rows))?;
            }
        }
    }
    let mut acc = String::from("t\ta_to_b\tb_to_a\tlog_joint_a\tlog_joint_b\n");
    for r in load_trace(&cfg.out, variant, seed)? {
        let _ = writeln!(
            acc,
            "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            r.t,
            r.a_to_b.rate(),
            r.b_to_a.rate(),
            r.log_joint_a,
            r.log_joint_b
        );
    }
    write_file(&dir.join("acceptance.tsv"), &acc)
}

pub fn cmd_report(cfg: &ExperimentConfig) -> Result<Vec<VariantReport>, CliError> {
    let reports = cfg
        .parsed_variants()?
        .into_iter()
        .map(|v| load_report(&cfg.out, v))
        .collect::<Result<Vec<_>, _>>()?;
    let dir = cfg.out.join("report");
    write_file(&dir.join("tables.md"), &render_markdown(&reports))?;
    write_file(&dir.join("tables.tsv"), &render_tsv(&reports))?;
    for r in &reports {
        for s in &r.seeds {
            let run = run_dir(Path::new(""), r.variant, s.seed);
            plot_data(cfg, r.variant, s.seed, &dir.join("plots").join(run.strip_prefix("train").unwrap_or(&run)))?;
        }
    }
    Ok(reports)
}
