use std::fs;
use std::ops::ControlFlow;
use std::path::Path;

use serde::de::DeserializeOwned;
use urbangan::cluster::{assignments_csv, kmeans_fit, select_k, ProfileMatrix};
use urbangan::corpus::{build_raster_corpus, build_toy_corpus, toy_specs, CityCenter, Pipeline, ToyCitySpec};
use urbangan::gan::{build, load_checkpoint, sample, save_checkpoint, train};
use urbangan::morphology::{corpus_peaks, map_peaks, radial_profile, PeakParams, RadialProfile};
use urbangan::raster::{read_map, read_source_raster};
use urbangan::render::{self, map_scene, profile_scene, report_scene};
use urbangan::stats::{compare_report, ComparisonReport, Histogram};
use urbangan::{CityMap, Corpus, Error, Result};

use crate::config::RunConfig;
use crate::{Cli, Command, RenderKind};

fn parse_enum<T: DeserializeOwned>(flag: &str, value: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| Error::Argument(format!("--{flag}: unknown value `{value}`")))
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_overrides(cfg: &mut RunConfig, cmd: &Command) -> Result<()> {
    match cmd {
        Command::SynthCorpus { count, archetypes, n_centers, spread_km, noise, width, pixel_size, .. } => {
            let s = &mut cfg.synth_corpus;
            set(&mut s.count, *count);
            if let Some(names) = archetypes {
                s.archetypes = names.iter().map(|n| parse_enum("archetypes", n)).collect::<Result<_>>()?;
            }
            set(&mut s.n_centers, *n_centers);
            set(&mut s.center_spread_km, *spread_km);
            set(&mut s.noise_level, *noise);
            set(&mut s.width, *width);
            set(&mut s.pixel_size, *pixel_size);
        }
        Command::Ingest { side_km, agg_pixel_size, width, source_name, .. } => {
            let p = &mut cfg.ingest.pipeline;
            set(&mut p.side_km, *side_km);
            set(&mut p.agg_pixel_size, *agg_pixel_size);
            set(&mut p.final_width, *width);
            if source_name.is_some() {
                cfg.ingest.source_name = source_name.clone();
            }
        }
        Command::Train { steps, batch_size, base_channels, z_dim, loss_variant, .. } => {
            set(&mut cfg.train.steps, *steps);
            let g = &mut cfg.train.gan;
            set(&mut g.batch_size, *batch_size);
            set(&mut g.base_channels, *base_channels);
            set(&mut g.z_dim, *z_dim);
            if let Some(v) = loss_variant {
                g.loss_variant = parse_enum("loss-variant", v)?;
            }
        }
        Command::Generate { count, .. } => set(&mut cfg.generate.count, *count),
        Command::Profile { ring_width_km, .. } => {
            if ring_width_km.is_some() {
                cfg.profile.ring_width_km = *ring_width_km;
            }
        }
        Command::Peaks { ring_width_km, h, delta_km, .. } => override_peaks(&mut cfg.peaks, *ring_width_km, *h, *delta_km),
        Command::Render { ring_width_km, h, delta_km, .. } => override_peaks(&mut cfg.render, *ring_width_km, *h, *delta_km),
        Command::Cluster { k, k_min, k_max, threshold, .. } => {
            let c = &mut cfg.cluster;
            if k.is_some() {
                c.k = *k;
            }
            set(&mut c.k_min, *k_min);
            set(&mut c.k_max, *k_max);
            set(&mut c.explained_threshold, *threshold);
        }
        Command::Compare { k, min_expected, mode, .. } => {
            let c = &mut cfg.compare;
            if k.is_some() {
                c.cluster.k = *k;
            }
            set(&mut c.min_expected, *min_expected);
            if let Some(m) = mode {
                c.cluster.mode = parse_enum("mode", m)?;
            }
        }
    }
    Ok(())
}

fn override_peaks(p: &mut PeakParams, ring: Option<f64>, h: Option<f64>, delta: Option<f64>) {
    if ring.is_some() {
        p.ring_width_km = ring;
    }
    set(&mut p.min_height_fraction, h);
    set(&mut p.min_separation_km, delta);
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    apply_overrides(&mut cfg, &cli.command)?;
    cfg.derive_seeds();
    cfg.validate()?;
    if cli.print_config {
        println!("{}", serde_json::to_string_pretty(&cfg)?);
    }
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::Argument("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Argument(format!("--jobs: {e}")))?;
    }
    dispatch(&cfg, &cli.command)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn read_json<T: DeserializeOwned>(path: &Path, field: &str) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        field: field.into(),
        message: format!("{}: {e}", path.display()),
    })
}

/// A corpus directory or a single map file.
enum Input {
    Map(CityMap),
    Corpus(Corpus),
}

fn read_input(path: &Path) -> Result<Input> {
    if path.is_dir() {
        Ok(Input::Corpus(Corpus::load(path)?))
    } else {
        Ok(Input::Map(read_map(path)?))
    }
}

fn dispatch(cfg: &RunConfig, cmd: &Command) -> Result<()> {
    match cmd {
        Command::SynthCorpus { out, .. } => {
            let s = &cfg.synth_corpus;
            let templates: Vec<ToyCitySpec> = s
                .archetypes
                .iter()
                .map(|&a| ToyCitySpec {
                    archetype: a,
                    n_centers: if a == urbangan::corpus::Archetype::Monocentric { 1 } else { s.n_centers },
                    center_spread_km: s.center_spread_km,
                    density_scale: s.density_scale,
                    noise_level: s.noise_level,
                    seed: 0,
                })
                .collect();
            let pipeline = Pipeline {
                side_km: s.width as f64 * s.pixel_size / 1000.0,
                agg_pixel_size: s.pixel_size,
                final_width: s.width,
            };
            build_toy_corpus(&toy_specs(&templates, s.count, cfg.corpus_seed()), &pipeline)?.save(out)
        }
        Command::Ingest { raster, centers, out, .. } => {
            let source = read_source_raster(raster)?;
            let centers: Vec<CityCenter> = read_json(centers, "centers")?;
            let name = cfg
                .ingest
                .source_name
                .clone()
                .unwrap_or_else(|| raster.file_name().map_or("raster".into(), |n| n.to_string_lossy().into_owned()));
            build_raster_corpus(&source, &name, &centers, &cfg.ingest.pipeline)?.save(out)
        }
        Command::Train { corpus, out, resume, log, .. } => {
            let corpus = Corpus::load(corpus)?;
            let mut model = match resume {
                Some(path) => load_checkpoint(path)?,
                None => {
                    let mut gan = cfg.train.gan.clone();
                    gan.output_width = corpus.width();
                    gan.pixel_size = corpus.pixel_size();
                    build(&gan)?
                }
            };
            let history = train(&mut model, &corpus, cfg.train.steps, |_, _| ControlFlow::Continue(()))?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            save_checkpoint(&model, out)?;
            if let Some(path) = log {
                write_text(path, &history.to_csv())?;
            }
            Ok(())
        }
        Command::Generate { checkpoint, out, .. } => {
            let model = load_checkpoint(checkpoint)?;
            sample(&model, cfg.generate.count, cfg.sample_seed())?.save(out)
        }
        Command::Profile { input, out, .. } => {
            let profile = |m: &CityMap| radial_profile(m, cfg.profile.ring_width_km.unwrap_or(m.pixel_size() / 1000.0));
            match read_input(input)? {
                Input::Map(m) => write_text(out, &profile(&m)?.to_csv()),
                Input::Corpus(c) => {
                    fs::create_dir_all(out)?;
                    for (m, id) in c.maps().iter().zip(c.ids()) {
                        let p = profile(m).map_err(|e| e.with_source(&id))?;
                        write_text(&out.join(format!("{id}.csv")), &p.to_csv())?;
                    }
                    Ok(())
                }
            }
        }
        Command::Peaks { input, out, .. } => match read_input(input)? {
            Input::Map(m) => write_text(out, &map_peaks(&m, &cfg.peaks)?.1.to_csv()),
            Input::Corpus(c) => {
                fs::create_dir_all(out)?;
                let all = corpus_peaks(c.maps(), &cfg.peaks)?;
                for ((_, peaks), id) in all.iter().zip(c.ids()) {
                    write_text(&out.join(format!("{id}.csv")), &peaks.to_csv())?;
                }
                let hist = Histogram::from_observations(all.iter().map(|(_, p)| p.len()));
                write_text(&out.join("peak_counts.csv"), &hist.to_csv())
            }
        },
        Command::Cluster { corpus, out, .. } => {
            let corpus = Corpus::load(corpus)?;
            let ring = cfg.profile.ring_width_km.unwrap_or(corpus.pixel_size() / 1000.0);
            let profiles = corpus
                .maps()
                .iter()
                .zip(corpus.ids())
                .map(|(m, id)| radial_profile(m, ring).map_err(|e| e.with_source(id)))
                .collect::<Result<Vec<_>>>()?;
            let mut data = ProfileMatrix::from_profiles(corpus.ids(), &profiles)?;
            if cfg.cluster.normalize {
                data = data.normalized();
            }
            let c = &cfg.cluster;
            fs::create_dir_all(out)?;
            let k = match c.k {
                Some(k) => k,
                None => {
                    let hi = c.k_max.min(data.len());
                    let sel = select_k(&data, c.k_min..=hi, c.explained_threshold, c.seed, &c.kmeans)?;
                    write_json(&out.join("selection.json"), &sel)?;
                    sel.k
                }
            };
            let model = kmeans_fit(&data, k, c.seed, &c.kmeans)?;
            write_json(&out.join("model.json"), &model)?;
            write_text(&out.join("assignments.csv"), &assignments_csv(data.ids(), &model.assignments))
        }
        Command::Compare { real, synth, out, .. } => {
            let report = compare_report(&Corpus::load(real)?, &Corpus::load(synth)?, &cfg.compare)?;
            fs::create_dir_all(out)?;
            write_json(&out.join("report.json"), &report)?;
            write_text(&out.join("peak_hist_real.csv"), &report.peak_hist_real.to_csv())?;
            write_text(&out.join("peak_hist_synth.csv"), &report.peak_hist_synth.to_csv())?;
            write_text(&out.join("shares_real.csv"), &report.cluster.shares_real.to_csv())?;
            write_text(&out.join("shares_synth.csv"), &report.cluster.shares_synth.to_csv())?;
            let scene = report_scene(&report);
            render::write(&scene, &out.join("report.svg"))?;
            render::write(&scene, &out.join("report.png"))
        }
        Command::Render { kind, input, out, .. } => {
            render::Format::from_path(out)?;
            let scene = match kind {
                RenderKind::Map => map_scene(&read_map(input)?),
                RenderKind::Profile | RenderKind::Peaks => {
                    let profile = profile_input(input, cfg)?;
                    let peaks = match kind {
                        RenderKind::Peaks => Some(urbangan::morphology::find_peaks(
                            &profile,
                            cfg.render.min_height_fraction,
                            cfg.render.min_separation_km,
                        )?),
                        _ => None,
                    };
                    profile_scene(&profile, peaks.as_ref())
                }
                RenderKind::Report => report_scene(&read_json::<ComparisonReport>(input, "report")?),
            };
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            render::write(&scene, out)
        }
    }
}

/// A profile CSV, or a map whose profile is computed on the fly.
fn profile_input(path: &Path, cfg: &RunConfig) -> Result<RadialProfile> {
    if path.extension().is_some_and(|e| e == "csv") {
        RadialProfile::from_csv(&fs::read_to_string(path)?)
    } else {
        let m = read_map(path)?;
        radial_profile(&m, cfg.render.ring_width_for(&m))
    }
}
