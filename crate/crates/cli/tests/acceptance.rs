//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fail.

use avatarforge_core::backends::{
    mock_detect_pose, mock_render, BackendError, BackendSuite, GenerationRequest, Inpainter, MockBackend, Slot,
};
use avatarforge_core::compose::{feather, harmonic_inpaint};
use avatarforge_core::consistency::{cosine_similarity, frame_l1, frame_mse, pose_mse, EmbeddingVector};
use avatarforge_core::media::{load_frame, save_frame, ImageBuffer, Keypoint, MaskMap, PoseFrame, NUM_KEYPOINTS};
use avatarforge_core::nss::{
    brisque_features, brisque_image_score, brisque_score, fit_aggd, fit_ggd, fit_mvg, niqe_features,
    niqe_image_score, niqe_score, MvgModel, SvrModel, FEATURE_DIM,
};
use avatarforge_core::pipeline::{
    build_interframe_dataset, crop_regions, evaluate_video, synthesize_video, AdapterKind, EvalInputs,
    PipelineConfig, PromptSpec, RegionBox, RegionDetector,
};
use avatarforge_core::report::MetricReport;
use avatarforge_core::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Instant;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ggd_recovery() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut elapsed = 0.0;
    for (i, alpha) in [0.5, 1.0, 2.0, 4.0].into_iter().enumerate() {
        // ±G^(1/α) with G ~ Gamma(1/α), rescaled to unit variance.
        let var = statrs::function::gamma::gamma(3.0 / alpha) / statrs::function::gamma::gamma(1.0 / alpha);
        let scale = var.sqrt().recip();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + i as u64);
        let g = Gamma::new(1.0 / alpha, 1.0).unwrap();
        let xs: Vec<f64> = (0..100_000)
            .map(|_| {
                let m = scale * g.sample(&mut rng).powf(1.0 / alpha);
                if rng.random_bool(0.5) { m } else { -m }
            })
            .collect();
        let t = Instant::now();
        let fit = fit_ggd(&xs).map_err(|e| e.to_string())?;
        elapsed += t.elapsed().as_secs_f64();
        let rel = (fit.alpha - alpha).abs() / alpha;
        worst = worst.max(rel);
        ensure(rel < 0.05, || format!("alpha {alpha}: fitted {:.4}", fit.alpha))?;
        ensure((fit.sigma_sq - 1.0).abs() < 0.05, || format!("alpha {alpha}: sigma^2 {:.4}", fit.sigma_sq))?;
    }
    ensure(elapsed < 5.0, || format!("fits took {elapsed:.2} s"))?;
    Ok(format!("worst relative error {:.2}%, {elapsed:.3} s", worst * 100.0))
}

fn aggd_symmetry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..100 {
        let n = rng.random_range(8..2000);
        let half: Vec<f64> = (0..n).map(|_| rng.random_range(1e-4..20.0)).collect();
        let mut xs: Vec<f64> = half.iter().map(|v| -v).collect();
        xs.extend(&half);
        let fit = fit_aggd(&xs).map_err(|e| e.to_string())?;
        ensure(fit.mean_eta == 0.0, || format!("trial {trial}: eta {:e}", fit.mean_eta))?;
        let gap = (fit.sigma_l_sq - fit.sigma_r_sq).abs();
        ensure(gap < 1e-12, || format!("trial {trial}: variance gap {gap:e}"))?;
    }
    Ok("100 mirrored sets".into())
}

fn eye(d: usize) -> Vec<Vec<f64>> {
    (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn niqe_analytic() -> Outcome {
    let d = FEATURE_DIM;
    let a = MvgModel::new(vec![0.0; d], eye(d)).map_err(|e| e.to_string())?;
    let mut mu = vec![0.0; d];
    mu[3] = 1.0;
    let b = MvgModel::new(mu, eye(d)).map_err(|e| e.to_string())?;
    let self_score = niqe_score(&a, &a).map_err(|e| e.to_string())?;
    ensure(self_score == 0.0, || format!("score(A,A) = {self_score:e}"))?;
    let shift = niqe_score(&a, &b).map_err(|e| e.to_string())?;
    ensure((shift - 1.0).abs() <= 1e-9, || format!("unit shift {shift}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..50 {
        let random_model = |rng: &mut ChaCha8Rng| {
            let rows: Vec<Vec<f64>> = (0..d + 4).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            fit_mvg(&rows).unwrap()
        };
        let (x, y) = (random_model(&mut rng), random_model(&mut rng));
        let (xy, yx) = (niqe_score(&x, &y).unwrap(), niqe_score(&y, &x).unwrap());
        ensure(xy.to_bits() == yx.to_bits(), || format!("asymmetric: {xy} vs {yx}"))?;
    }
    Ok(format!("unit shift {shift:.12}, 50 symmetric pairs"))
}

fn svr_oracle(x: &[f64], m: &SvrModel) -> f64 {
    let scaled: Vec<f64> = (0..FEATURE_DIM)
        .map(|i| {
            let (lo, hi) = (m.feature_min[i], m.feature_max[i]);
            if hi == lo { 0.0 } else { 2.0 * (x[i] - lo) / (hi - lo) - 1.0 }
        })
        .collect();
    m.support_vectors
        .iter()
        .zip(&m.dual_coefs)
        .map(|(sv, c)| c * (-m.gamma * sv.iter().zip(&scaled).map(|(s, v)| (s - v) * (s - v)).sum::<f64>()).exp())
        .sum::<f64>()
        - m.rho
}

fn svr_oracle_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(1..64);
        let lo: Vec<f64> = (0..FEATURE_DIM).map(|_| rng.random_range(-3.0..1.0)).collect();
        let model = SvrModel {
            gamma: rng.random_range(0.001..1.0),
            rho: rng.random_range(-100.0..100.0),
            dual_coefs: (0..n).map(|_| rng.random_range(-50.0..50.0)).collect(),
            support_vectors: (0..n).map(|_| (0..FEATURE_DIM).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
            feature_max: lo.iter().map(|l| l + rng.random_range(0.01..4.0)).collect(),
            feature_min: lo,
        };
        let x: Vec<f64> = (0..FEATURE_DIM).map(|_| rng.random_range(-4.0..6.0)).collect();
        let got = brisque_score(&x, &model).map_err(|e| e.to_string())?;
        let want = svr_oracle(&x, &model);
        let err = (got - want).abs();
        worst = worst.max(err);
        ensure(err <= 1e-12 * want.abs().max(1.0), || format!("{got} vs {want}"))?;
    }
    Ok(format!("50 models, max |diff| {worst:e}"))
}

fn photos() -> Vec<(String, ImageBuffer)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/photos");
    let mut paths: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| (p.file_stem().unwrap().to_string_lossy().into_owned(), load_frame(&p).unwrap().to_gray()))
        .collect()
}

fn add_noise(img: &ImageBuffer, sigma: f64, seed: u64) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, sigma).unwrap();
    let data = img.data().iter().map(|v| (v + n.sample(&mut rng)).clamp(0.0, 1.0)).collect();
    ImageBuffer::new(img.width(), img.height(), img.channels(), data).unwrap()
}

/// A "distance from clean photos" SVR: support vectors are the scaled
/// features of clean photos, all with the same negative coefficient, so the
/// score rises as an image moves away from them.
fn clean_prior_svr(clean: &[[f64; FEATURE_DIM]]) -> SvrModel {
    let lo: Vec<f64> = (0..FEATURE_DIM).map(|i| clean.iter().map(|f| f[i]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..FEATURE_DIM).map(|i| clean.iter().map(|f| f[i]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let scale = |f: &[f64; FEATURE_DIM]| -> Vec<f64> {
        (0..FEATURE_DIM).map(|i| if hi[i] == lo[i] { 0.0 } else { 2.0 * (f[i] - lo[i]) / (hi[i] - lo[i]) - 1.0 }).collect()
    };
    let svs: Vec<Vec<f64>> = clean.iter().map(scale).collect();
    let mut d2: Vec<f64> = Vec::new();
    for i in 0..svs.len() {
        for j in i + 1..svs.len() {
            d2.push(svs[i].iter().zip(&svs[j]).map(|(a, b)| (a - b) * (a - b)).sum());
        }
    }
    d2.sort_by(f64::total_cmp);
    let median = d2[d2.len() / 2];
    SvrModel {
        gamma: 1.0 / median,
        rho: -100.0,
        dual_coefs: vec![-100.0 / svs.len() as f64; svs.len()],
        support_vectors: svs,
        feature_min: lo,
        feature_max: hi,
    }
}

fn quality_directionality() -> Outcome {
    let photos = photos();
    ensure(photos.len() >= 5, || format!("only {} photos bundled", photos.len()))?;
    let brisque: Vec<[f64; FEATURE_DIM]> = photos.iter().map(|(_, p)| brisque_features(p).unwrap()).collect();
    let niqe: Vec<Vec<[f64; FEATURE_DIM]>> = photos.iter().map(|(_, p)| niqe_features(p).unwrap()).collect();
    let mut lines = Vec::new();
    for (i, (name, clean)) in photos.iter().enumerate() {
        let noisy = add_noise(clean, 0.1, 1000 + i as u64);
        let others: Vec<[f64; FEATURE_DIM]> =
            brisque.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, f)| *f).collect();
        let svr = clean_prior_svr(&others);
        let b0 = brisque_image_score(clean, &svr).map_err(|e| e.to_string())?;
        let b1 = brisque_image_score(&noisy, &svr).map_err(|e| e.to_string())?;
        let pristine_rows: Vec<[f64; FEATURE_DIM]> =
            niqe.iter().enumerate().filter(|(j, _)| *j != i).flat_map(|(_, f)| f.iter().copied()).collect();
        let pristine = fit_mvg(&pristine_rows).map_err(|e| e.to_string())?;
        let n0 = niqe_image_score(clean, &pristine, None).map_err(|e| e.to_string())?;
        let n1 = niqe_image_score(&noisy, &pristine, None).map_err(|e| e.to_string())?;
        ensure(b1 > b0, || format!("{name}: BRISQUE {b0:.3} -> {b1:.3}"))?;
        ensure(n1 > n0, || format!("{name}: NIQE {n0:.3} -> {n1:.3}"))?;
        lines.push(format!("{name} B {b0:.1}->{b1:.1} N {n0:.1}->{n1:.1}"));
    }
    Ok(lines.join("; "))
}

fn harmonic_gradient() -> Outcome {
    let img = ImageBuffer::from_fn_gray(128, 128, |x, y| (0.3 * x as f64 + 0.5 * y as f64) / 128.0);
    let hole = MaskMap::from_fn(128, 128, |x, y| (48..80).contains(&x) && (48..80).contains(&y));
    let mut damaged = img.clone();
    for y in 48..80 {
        for x in 48..80 {
            damaged.set_pixel(x, y, &[0.0]);
        }
    }
    let t = Instant::now();
    let out = harmonic_inpaint(&damaged, &hole).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let err = out.data().iter().zip(img.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(err <= 1e-3, || format!("max error {err:e}"))?;
    ensure(secs < 2.0, || format!("{secs:.2} s"))?;
    Ok(format!("max error {err:.2e}, {secs:.3} s"))
}

const SIZE: usize = 128;

fn walk(n: usize) -> Vec<PoseFrame> {
    (0..n).map(|t| PoseFrame::stick_figure(56.0 + 2.0 * t as f64, 64.0, 0.7 * t as f64)).collect()
}

fn spec() -> PromptSpec {
    PromptSpec::new("striped sweater", "old man with a grey beard", "snowy forest").unwrap()
}

fn config(suite: BackendSuite, exec: Execution) -> PipelineConfig {
    let mut c = PipelineConfig::new(suite);
    c.width = SIZE;
    c.height = SIZE;
    c.seed = 2024;
    c.exec = exec;
    c
}

fn background_invariant() -> Outcome {
    let cfg = config(BackendSuite::mock(), Execution::default());
    let out = synthesize_video(&spec(), &walk(4), &cfg).map_err(|e| e.to_string())?;
    let feathered: Vec<MaskMap> = out.plate.masks.iter().map(|m| feather(m, cfg.feather_width)).collect();
    let frames = out.video.frames();
    let mut outside = 0;
    for y in 0..SIZE {
        for x in 0..SIZE {
            if feathered.iter().any(|m| m.get(x, y) > 0.0) {
                continue;
            }
            outside += 1;
            let p0 = frames[0].pixel(x, y);
            for (t, f) in frames.iter().enumerate().skip(1) {
                ensure(f.pixel(x, y) == p0, || format!("pixel ({x},{y}) differs at frame {t}"))?;
            }
        }
    }
    ensure(outside > SIZE * SIZE / 2, || format!("only {outside} pixels outside the masks"))?;
    Ok(format!("{outside} pixels constant across 4 frames"))
}

fn random_pose(rng: &mut ChaCha8Rng) -> PoseFrame {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    while pts.len() < NUM_KEYPOINTS {
        let p = (rng.random_range(6.0..122.0), rng.random_range(6.0..122.0));
        if pts.iter().all(|q: &(f64, f64)| (p.0 - q.0).hypot(p.1 - q.1) > 8.0) {
            pts.push(p);
        }
    }
    PoseFrame::new(pts.into_iter().map(|(x, y)| Keypoint::new(x, y, 1.0)).collect()).unwrap()
}

fn pose_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut total = 0.0;
    for i in 0..20 {
        let pose = random_pose(&mut rng);
        let req = GenerationRequest {
            prompt: format!("pose {i}"),
            pose: Some(pose.clone()),
            seed: i,
            width: SIZE,
            height: SIZE,
            ..Default::default()
        };
        let detected = mock_detect_pose(&mock_render(&req).map_err(|e| e.to_string())?);
        total += pose_mse(&pose, &detected, SIZE, SIZE).map_err(|e| e.to_string())?;
    }
    let mean = total / 20.0;
    ensure(mean <= 0.05, || format!("mean pose MSE {mean}"))?;

    let t = Instant::now();
    let poses = walk(8);
    let out = synthesize_video(&spec(), &poses, &config(BackendSuite::mock(), Execution::default()))
        .map_err(|e| e.to_string())?;
    let e2e: f64 = out
        .video
        .frames()
        .iter()
        .zip(&poses)
        .map(|(f, p)| pose_mse(p, &mock_detect_pose(f), SIZE, SIZE).unwrap())
        .sum::<f64>()
        / 8.0;
    let secs = t.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("8-frame synthesize+detect took {secs:.2} s"))?;
    Ok(format!("mean MSE {mean:.4} over 20 poses; 8 frames in {secs:.2} s (MSE {e2e:.4})"))
}

/// Forwards to the mock and keeps every request.
struct Recording(Mutex<Vec<GenerationRequest>>);

impl Inpainter for Recording {
    fn inpaint(&self, req: &GenerationRequest) -> Result<ImageBuffer, BackendError> {
        self.0.lock().unwrap().push(req.clone());
        MockBackend.inpaint(req)
    }
}

fn autoregressive_contract() -> Outcome {
    let rec = Arc::new(Recording(Mutex::new(Vec::new())));
    let mut suite = BackendSuite::mock();
    suite.inpainter = rec.clone();
    let out = synthesize_video(&spec(), &walk(5), &config(suite, Execution::default())).map_err(|e| e.to_string())?;
    let reqs = rec.0.lock().unwrap();
    let frames = out.video.frames();
    ensure(reqs.len() == frames.len(), || format!("{} inpaint calls for {} frames", reqs.len(), frames.len()))?;
    for (t, rec) in out.trace.frames.iter().enumerate() {
        ensure(rec.prev_frame_used == (t > 0), || format!("prev_frame_used wrong at {t}"))?;
        ensure(reqs[t].prev_frame.as_ref() == t.checked_sub(1).map(|p| &frames[p]), || {
            format!("request {t} does not carry frame {}", t as isize - 1)
        })?;
        let logged: Vec<&str> = rec
            .backend_calls
            .iter()
            .filter(|c| c.slot == Slot::Inpainter)
            .map(|c| c.digest.as_str())
            .collect();
        ensure(logged == [reqs[t].digest().as_str()], || format!("frame {t} digest not in trace"))?;
        if t > 0 {
            ensure(rec.prev_frame_digest.as_deref() == Some(frames[t - 1].digest().as_str()), || {
                format!("frame {t} prev digest")
            })?;
        }
    }
    Ok(format!("{} frames, prev_frame_used only from frame 1", frames.len()))
}

struct FixedBoxes(Vec<RegionBox>);

impl RegionDetector for FixedBoxes {
    fn detect_regions(&self, _: &ImageBuffer, _: AdapterKind) -> Result<Vec<RegionBox>, BackendError> {
        Ok(self.0.clone())
    }
}

fn dataset_builders() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut checked = 0;
    for round in 0..5 {
        let lens: Vec<usize> = (0..rng.random_range(1..5)).map(|_| rng.random_range(2..7)).collect();
        let videos: Vec<_> = lens
            .iter()
            .map(|&n| {
                let frames = (0..n)
                    .map(|t| ImageBuffer::filled(8, 8, &[t as f64 / 8.0, rng.random_range(0.0..1.0), 0.5]).unwrap())
                    .collect();
                avatarforge_core::media::FrameSequence::new(frames, 24.0).unwrap()
            })
            .collect();
        let job = build_interframe_dataset(&videos, &MockBackend, &dir.path().join(format!("r{round}")), Execution::default())
            .map_err(|e| e.to_string())?;
        let want: usize = lens.iter().map(|n| n - 1).sum();
        ensure(job.pairs.len() == want, || format!("lengths {lens:?}: {} pairs, expected {want}", job.pairs.len()))?;
        checked += 1;
    }

    let img = ImageBuffer::from_fn_rgb(40, 30, |x, y| [x as f64 / 40.0, y as f64 / 30.0, ((x * y) % 7) as f64 / 7.0]);
    for _ in 0..20 {
        let b = RegionBox {
            x0: rng.random_range(-10.0..35.0),
            y0: rng.random_range(-10.0..25.0),
            x1: rng.random_range(5.0..55.0),
            y1: rng.random_range(5.0..45.0),
        };
        let crops = crop_regions(std::slice::from_ref(&img), &FixedBoxes(vec![b]), AdapterKind::Clothes, Execution::default())
            .map_err(|e| e.to_string())?;
        let (x0, y0) = (b.x0.floor().max(0.0) as usize, b.y0.floor().max(0.0) as usize);
        let (x1, y1) = (b.x1.ceil().min(40.0) as usize, b.y1.ceil().min(30.0) as usize);
        if x1 <= x0 || y1 <= y0 {
            ensure(crops.is_empty(), || format!("{b:?} should be empty"))?;
            continue;
        }
        ensure(crops.len() == 1, || format!("{b:?}: {} crops", crops.len()))?;
        let c = &crops[0];
        ensure(c.width() == x1 - x0 && c.height() == y1 - y0, || format!("{b:?}: crop {:?}", c.dims()))?;
        for y in 0..c.height() {
            for x in 0..c.width() {
                ensure(c.pixel(x, y) == img.pixel(x0 + x, y0 + y), || format!("{b:?}: pixel ({x},{y})"))?;
            }
        }
    }
    Ok(format!("{checked} randomized video sets, 20 crop boxes"))
}

fn metric_trivia() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = ImageBuffer::from_fn_rgb(16, 16, |_, _| [0.0; 3]);
    let a = ImageBuffer::new(16, 16, 3, a.data().iter().map(|_| rng.random_range(0.2..0.8)).collect()).unwrap();
    let b = ImageBuffer::new(16, 16, 3, a.data().iter().map(|v| v + 10.0 / 255.0).collect()).unwrap();
    let c = ImageBuffer::new(16, 16, 3, a.data().iter().map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
    let e = |r: Result<f64, avatarforge_core::consistency::MetricError>| r.map_err(|e| e.to_string());
    ensure(e(frame_mse(&a, &a))? == 0.0 && e(frame_l1(&a, &a))? == 0.0, || "nonzero on equal frames".into())?;
    ensure(e(frame_mse(&a, &c))? == e(frame_mse(&c, &a))?, || "MSE asymmetric".into())?;
    ensure(e(frame_l1(&a, &c))? == e(frame_l1(&c, &a))?, || "L1 asymmetric".into())?;
    let (mse, l1) = (e(frame_mse(&a, &b))?, e(frame_l1(&a, &b))?);
    ensure((mse - 100.0).abs() < 1e-9 && (l1 - 10.0).abs() < 1e-9, || format!("offset gives MSE {mse}, L1 {l1}"))?;

    for _ in 0..100 {
        let v = EmbeddingVector::new((0..32).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let w = EmbeddingVector::new((0..32).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let s = e(cosine_similarity(&v, &w))?;
        ensure((-100.0..=100.0).contains(&s), || format!("cosine {s} out of bounds"))?;
        ensure(e(cosine_similarity(&v, &v))? == 100.0, || "identity is not 100".into())?;
    }
    Ok(format!("offset MSE {mse:.6}, L1 {l1:.6}"))
}

fn full_run(exec: Execution, pristine: &MvgModel, svr: &SvrModel) -> Result<(Vec<ImageBuffer>, String, String), String> {
    let cfg = config(BackendSuite::mock(), exec);
    let poses = walk(4);
    let out = synthesize_video(&spec(), &poses, &cfg).map_err(|e| e.to_string())?;
    let prompt = out.prompt.full_prompt();
    let mut inputs = EvalInputs::new("avatarforge", out.video.frames());
    inputs.poses = Some(&poses);
    inputs.prompt = Some(&prompt);
    inputs.masks = Some(&out.plate.masks);
    inputs.niqe_model = Some(pristine);
    inputs.svr_model = Some(svr);
    inputs.embedder = Some(cfg.backends.embedder.as_ref());
    inputs.pose_detector = Some(cfg.backends.pose_detector.as_ref());
    inputs.exec = exec;
    let report = evaluate_video(&inputs).map_err(|e| e.to_string())?;
    Ok((out.video.into_frames(), out.trace.to_json(), report.to_json().map_err(|e| e.to_string())?))
}

fn determinism() -> Outcome {
    let photos = photos();
    let rows: Vec<[f64; FEATURE_DIM]> = photos.iter().flat_map(|(_, p)| niqe_features(p).unwrap()).collect();
    let pristine = fit_mvg(&rows).map_err(|e| e.to_string())?;
    let svr = clean_prior_svr(&photos.iter().map(|(_, p)| brisque_features(p).unwrap()).collect::<Vec<_>>());
    let a = full_run(Execution::Parallel, &pristine, &svr)?;
    let b = full_run(Execution::Parallel, &pristine, &svr)?;
    let s = full_run(Execution::Sequential, &pristine, &svr)?;
    ensure(a.0 == b.0, || "frames differ between runs".into())?;
    ensure(a.1 == b.1, || "traces differ between runs".into())?;
    ensure(a.2 == b.2, || "reports differ between runs".into())?;
    ensure(a == s, || "parallel and sequential runs differ".into())?;
    let report = MetricReport::from_json(&a.2).map_err(|e| e.to_string())?;
    let computed = report.entries.iter().filter(|e| e.value.is_some()).count();
    Ok(format!("frames, trace and report identical across 3 runs; {computed}/13 metrics computed"))
}

fn report_layout() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let frames = dir.path().join("frames");
    std::fs::create_dir_all(&frames).map_err(|e| e.to_string())?;
    for i in 0..2 {
        save_frame(&ImageBuffer::filled(32, 32, &[0.4, 0.5, 0.6]).unwrap(), frames.join(format!("{i}.png")))
            .map_err(|e| e.to_string())?;
    }
    let out = dir.path().join("report");
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_avatarforge"))
        .args(["evaluate", "--frames"])
        .arg(&frames)
        .arg("--out")
        .arg(&out)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(status.status.success(), || String::from_utf8_lossy(&status.stderr).into_owned())?;
    let md = std::fs::read_to_string(out.join("report.md")).map_err(|e| e.to_string())?;
    let expected = [
        "Frame NIQE ↓",
        "Body NIQE ↓",
        "Background NIQE ↓",
        "Frame BRISQUE ↓",
        "Body BRISQUE ↓",
        "Background BRISQUE ↓",
        "Pose MES ↓",
        "Text Alignment ↑",
        "Frame MSE ↓",
        "Frame L1 ↓",
        "Frame CLIP ↑",
        "Body CLIP ↑",
        "Background CLIP ↑",
    ];
    let missing: Vec<&str> = expected.iter().copied().filter(|h| !md.contains(h)).collect();
    ensure(missing.is_empty(), || format!("missing headers {missing:?}"))?;
    Ok("13 headers with direction arrows".into())
}

fn main() {
    let criteria: [Criterion; 13] = [
        ("GGD recovery", ggd_recovery),
        ("AGGD symmetry", aggd_symmetry),
        ("NIQE analytic cases", niqe_analytic),
        ("BRISQUE SVR oracle", svr_oracle_check),
        ("Quality directionality", quality_directionality),
        ("Harmonic inpaint", harmonic_gradient),
        ("Background-consistency invariant", background_invariant),
        ("Pose round-trip", pose_round_trip),
        ("Autoregressive contract", autoregressive_contract),
        ("Dataset builders", dataset_builders),
        ("Metric trivia suite", metric_trivia),
        ("Determinism", determinism),
        ("Report layout", report_layout),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 13 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
