use std::fmt::Write as _;

use circaphase::data_model::{load_cohort, write_series_csv, ParticipantRecording};
use circaphase::eval::{
    day_night_eval, loo_case_study, prepare_cohort, report, EvalReport, Experiment,
};
use circaphase::features::{build_dataset, FeatureDataset};
use circaphase::synth::generate_cohort;
use circaphase::trees::ModelFamily;

use crate::config::ExperimentConfig;
use crate::output::{OutputDir, Seeds};
use crate::CliError;

type Res = Result<(), CliError>;

fn seeds(cfg: &ExperimentConfig) -> Seeds {
    Seeds {
        cv: cfg.cv.seed,
        synth: cfg.data_dir.is_none().then(|| cfg.synth_params().seed),
    }
}

fn finish(out: OutputDir, command: &str, cfg: &ExperimentConfig) -> Res {
    out.finish(command, cfg, seeds(cfg))
}

fn raw_cohort(cfg: &ExperimentConfig) -> Result<Vec<ParticipantRecording>, CliError> {
    match &cfg.data_dir {
        Some(dir) => Ok(load_cohort(dir)?),
        None => Ok(generate_cohort(&cfg.synth_params())?
            .into_iter()
            .map(|(r, _)| r)
            .collect()),
    }
}

fn experiment(cfg: &ExperimentConfig) -> Result<Experiment, CliError> {
    let prepared = prepare_cohort(raw_cohort(cfg)?, &cfg.preprocess)?;
    let mut exp = Experiment::new(prepared, cfg.cv)?;
    exp.stride_minutes = cfg.stride_minutes;
    exp.min_coverage = cfg.min_coverage;
    Ok(exp)
}

fn tag(family: ModelFamily, r: &EvalReport) -> String {
    format!("{family}_{}_W{}", r.modality, r.window_minutes)
}

pub fn simulate(cfg: &ExperimentConfig) -> Res {
    let params = cfg.synth_params();
    let start = params.start()?;
    let mut out = OutputDir::new(&cfg.output_dir)?;
    for (rec, truth) in generate_cohort(&params)? {
        let pid = &rec.participant_id;
        for s in rec
            .channels
            .values()
            .filter(|s| !s.channel.is_derived())
            .chain([&rec.cbt])
        {
            out.write(
                &format!("data/{pid}/{}.csv", s.channel.name()),
                &write_series_csv(s),
            )?;
        }
        out.write(&format!("truth/{pid}.csv"), &truth.to_csv(start, rec.len()))?;
    }
    finish(out, "simulate", cfg)
}

pub fn preprocess(cfg: &ExperimentConfig) -> Res {
    let exp = experiment(cfg)?;
    let mut out = OutputDir::new(&cfg.output_dir)?;
    let mut stats = String::from("participant_id,channel,mean,sd,degenerate\n");
    for p in &exp.participants {
        let rec = &p.processed;
        for s in rec.channels.values().chain([&rec.cbt]) {
            out.write(
                &format!("preprocessed/{}/{}.csv", p.id(), s.channel.name()),
                &write_series_csv(s),
            )?;
        }
        for (ch, n) in &p.norm_stats {
            let _ = writeln!(
                stats,
                "{},{},{},{},{}",
                p.id(),
                ch.name(),
                n.mean,
                n.sd,
                n.degenerate
            );
        }
    }
    out.write("norm_stats.csv", &stats)?;
    finish(out, "preprocess", cfg)
}

pub fn fit_cosinor(cfg: &ExperimentConfig) -> Res {
    let exp = experiment(cfg)?;
    let mut out = OutputDir::new(&cfg.output_dir)?;
    let mut csv = String::from(
        "participant_id,segment_start,segment_end,mesor,amplitude,acrophase,rmse,n_samples\n",
    );
    for p in &exp.participants {
        for s in &p.reference.segments {
            let f = &s.fit;
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{}",
                p.id(),
                s.interval.start,
                s.interval.end,
                f.mesor,
                f.amplitude,
                f.acrophase,
                f.rmse,
                f.n_samples
            );
        }
    }
    out.write("cosinor_fits.csv", &csv)?;
    finish(out, "fit-cosinor", cfg)
}

pub fn features(cfg: &ExperimentConfig) -> Res {
    let exp = experiment(cfg)?;
    let mut out = OutputDir::new(&cfg.output_dir)?;
    for &m in &cfg.modalities {
        for &w in &cfg.windows {
            let win = cfg.window_config(w);
            let parts = exp
                .participants
                .iter()
                .map(|p| build_dataset(&p.processed, &p.reference, m, &win))
                .filter(|d| !matches!(d, Err(circaphase::Error::NoCoverage(_))))
                .collect::<Result<Vec<_>, _>>()?;
            let ds =
                FeatureDataset::concat(&parts).unwrap_or_else(|| FeatureDataset::empty(m, win));
            out.write(&format!("features/features_{m}_W{w}.csv"), &ds.to_csv())?;
        }
    }
    finish(out, "features", cfg)
}

pub fn train(cfg: &ExperimentConfig) -> Res {
    let exp = experiment(cfg)?;
    let mut out = OutputDir::new(&cfg.output_dir)?;
    let pr = cfg.primary;
    let model = exp.train_all(&cfg.grid_for(pr.model), pr.modality, pr.window_minutes)?;
    out.write(
        &format!(
            "models/{}_{}_W{}.model",
            pr.model, pr.modality, pr.window_minutes
        ),
        &model.to_text()?,
    )?;
    finish(out, "train", cfg)
}

pub fn evaluate(cfg: &ExperimentConfig) -> Res {
    let exp = experiment(cfg)?;
    let mut out = OutputDir::new(&cfg.output_dir)?;
    let pr = cfg.primary;
    let r = exp.evaluate(&cfg.grid_for(pr.model), pr.modality, pr.window_minutes)?;
    let t = tag(pr.model, &r);
    out.write(&format!("reports/cv_{t}_folds.csv"), &report::folds_csv(&r))?;
    out.write(
        &format!("reports/cv_{t}_predictions.csv"),
        &report::predictions_csv(&r),
    )?;
    out.write(
        "reports/table4.csv",
        &report::window_table_csv(std::slice::from_ref(&r)),
    )?;
    out.write(
        "reports/day_night.csv",
        &day_night_eval(&r.predictions)?.to_csv(),
    )?;
    finish(out, "evaluate", cfg)
}

pub fn sweep(cfg: &ExperimentConfig) -> Res {
    let exp = experiment(cfg)?;
    let mut out = OutputDir::new(&cfg.output_dir)?;
    let pr = cfg.primary;
    let grid = cfg.grid_for(pr.model);
    let mut modalities = cfg.modalities.clone();
    if !modalities.contains(&pr.modality) {
        modalities.insert(0, pr.modality);
    }
    let mut all = Vec::new();
    for &m in &modalities {
        all.extend(exp.window_sweep(&grid, m, &cfg.windows)?);
    }
    let primary: Vec<EvalReport> = all
        .iter()
        .filter(|r| r.modality == pr.modality)
        .cloned()
        .collect();
    out.write("reports/table4.csv", &report::window_table_csv(&primary))?;
    out.write("reports/fig3.csv", &report::window_curve_csv(&all))?;
    finish(out, "sweep", cfg)
}

pub fn ablate(cfg: &ExperimentConfig) -> Res {
    let exp = experiment(cfg)?;
    let mut out = OutputDir::new(&cfg.output_dir)?;
    let grids: Vec<_> = cfg.models.iter().map(|&f| cfg.grid_for(f)).collect();
    let reports = exp.modality_ablation(&grids, &cfg.modalities, cfg.primary.window_minutes)?;
    out.write("reports/table3.csv", &report::modality_table_csv(&reports))?;
    finish(out, "ablate", cfg)
}

pub fn case_study(cfg: &ExperimentConfig) -> Res {
    let exp = experiment(cfg)?;
    let mut out = OutputDir::new(&cfg.output_dir)?;
    let pr = cfg.primary;
    let grid = cfg.grid_for(pr.model);
    let ids: Vec<String> = if cfg.case_study.participants.is_empty() {
        exp.participants
            .iter()
            .map(|p| p.id().to_string())
            .collect()
    } else {
        cfg.case_study.participants.clone()
    };
    for id in &ids {
        let trace = loo_case_study(&exp, id, pr.modality, pr.window_minutes, &grid)?;
        out.write(&format!("reports/case_{id}.csv"), &trace.to_csv())?;
    }
    finish(out, "case-study", cfg)
}
