//! Gibbs conditionals against enumeration of the joint, and the conjugate
//! update against numerical quadrature.

use emergelex_core::agent::{AgentState, ModelHyper, Utterance};
use emergelex_core::data::{generate_scenes, generate_world, Scene, WorldSpec};
use emergelex_core::h2h::{H2hAgent, H2hHyper};
use emergelex_core::prob::giw::{giw_log_density, giw_posterior};
use emergelex_core::prob::gauss::gaussian_logpdf;
use emergelex_core::{ByModality, GaussParams, GiwHyper, Modality, Rng, Simplex};
use nalgebra::{DMatrix, DVector};

fn scenes(seed: u64, n: usize) -> (Vec<Scene>, Vec<Scene>) {
    let mut rng = Rng::new(seed);
    let world = generate_world(&WorldSpec::default(), &mut rng).unwrap();
    let set = generate_scenes(&world, n, (1, 3), &mut rng).unwrap();
    (set.scenes_a, set.scenes_b)
}

fn broad(x: &[f64], var: f64) -> GaussParams {
    let d = x.len();
    GaussParams::new(DVector::from_column_slice(x), DMatrix::identity(d, d) * var).unwrap()
}

/// Posterior density of a 1-D Normal-Inverse-Gamma model, normalized by a
/// midpoint rule over (mu, sigma^2), compared with the closed form.
#[test]
fn giw_posterior_matches_quadrature() {
    let prior = GiwHyper::new(DVector::from_element(1, 0.2), 1.5, DMatrix::from_element(1, 1, 1.0), 4.0).unwrap();
    let data: Vec<[f64; 1]> = vec![[0.5], [-0.3], [1.2], [0.8]];
    let post = giw_posterior(&data, &prior).unwrap();
    let unnorm = |mu: f64, var: f64| -> f64 {
        let g = GaussParams::new(DVector::from_element(1, mu), DMatrix::from_element(1, 1, var)).unwrap();
        let lik: f64 = data.iter().map(|x| gaussian_logpdf(x, &g).unwrap()).sum();
        (giw_log_density(&g, &prior).unwrap() + lik).exp()
    };
    let (mu_lo, mu_hi, v_hi) = (-4.0, 5.0, 30.0);
    let (nm, nv) = (900, 3000);
    let (hm, hv) = ((mu_hi - mu_lo) / nm as f64, v_hi / nv as f64);
    let mut z = 0.0;
    let mut grid = Vec::with_capacity(nm * nv);
    for i in 0..nm {
        let mu = mu_lo + (i as f64 + 0.5) * hm;
        for j in 0..nv {
            let var = (j as f64 + 0.5) * hv;
            let u = unnorm(mu, var);
            z += u * hm * hv;
            grid.push((mu, var, u));
        }
    }
    let mut max_err: f64 = 0.0;
    for (mu, var, u) in grid.into_iter().step_by(97) {
        let g = GaussParams::new(DVector::from_element(1, mu), DMatrix::from_element(1, 1, var)).unwrap();
        let exact = giw_log_density(&g, &post).unwrap().exp();
        max_err = max_err.max((exact - u / z).abs());
    }
    assert!(max_err < 1e-3, "max abs density error {max_err}");
}

fn small_agent(seed: u64) -> (AgentState, Vec<Scene>, Vec<Utterance>) {
    let (s, _) = scenes(seed, 6);
    let hyper = ModelHyper {
        categories: ByModality::new(3, 4, 3, 4),
        ..ModelHyper::default()
    };
    let mut a = AgentState::init(&hyper, &s, &mut Rng::new(seed + 1)).unwrap();
    // flat weights and wide emissions keep every conditional far from a point mass
    for m in Modality::ALL {
        a.set_pi(m, Simplex::uniform(a.n_categories(m)).unwrap()).unwrap();
        for k in 0..a.n_categories(m) {
            a.set_phi(m, k, broad(s[k].attended_obs(m), 0.5)).unwrap();
        }
    }
    let words = a.initial_words(true, &mut Rng::new(seed + 2)).unwrap();
    (a, s, words)
}

fn from_log(lw: Vec<f64>) -> Simplex {
    Simplex::from_log_weights(&lw).unwrap()
}

#[test]
fn assignment_conditional_is_the_normalized_joint() {
    let (a, s, words) = small_agent(3);
    for m in Modality::ALL {
        for d in 0..s.len() {
            for j in 0..s[d].n_obs(m) {
                let lw: Vec<f64> = (0..a.n_categories(m))
                    .map(|k| {
                        let mut b = a.clone();
                        b.set_assignment(m, d, j, k).unwrap();
                        b.log_joint(&s, &words).unwrap()
                    })
                    .collect();
                let got = a.assignment_conditional(&s, &words, false, m, d, j).unwrap();
                assert!(got.tv_distance(&from_log(lw)) < 1e-9, "{m} d={d} j={j}");
            }
        }
    }
}

#[test]
fn resampled_assignments_follow_enumerated_conditionals() {
    let (mut a, s, words) = small_agent(4);
    let targets = ByModality::<()>::default().map(|m, _| {
        let k = a.n_categories(m);
        let lw: Vec<f64> = (0..k)
            .map(|c| {
                let mut b = a.clone();
                b.set_assignment(m, 0, 0, c).unwrap();
                b.log_joint(&s, &words).unwrap()
            })
            .collect();
        from_log(lw)
    });
    let mut counts = ByModality::<()>::default().map(|m, _| vec![0.0; a.n_categories(m)]);
    let mut rng = Rng::new(5);
    for _ in 0..60_000 {
        a.resample_assignments(&s, &words, false, &mut rng).unwrap();
        for m in Modality::ALL {
            counts[m][a.assignment(m, 0, 0)] += 1.0;
        }
    }
    for m in Modality::ALL {
        let top = targets[m].as_slice().iter().cloned().fold(0.0, f64::max);
        assert!(top < 0.95, "{m}: target too concentrated ({top})");
        let emp = Simplex::from_weights(counts[m].clone()).unwrap();
        assert!(emp.tv_distance(&targets[m]) < 0.01, "{m}: tv {}", emp.tv_distance(&targets[m]));
    }
}

#[test]
fn baseline_category_conditional_is_the_normalized_joint() {
    let (s, _) = scenes(6, 5);
    let hyper = H2hHyper {
        categories: 4,
        ..H2hHyper::default()
    };
    let mut a = H2hAgent::init(&hyper, &s, &mut Rng::new(7)).unwrap();
    a.set_pi(Simplex::uniform(4).unwrap()).unwrap();
    for l in 0..4 {
        for m in Modality::ALL {
            a.set_phi(m, l, broad(s[l].attended_obs(m), 0.5)).unwrap();
        }
    }
    let words = a.initial_words(&mut Rng::new(8)).unwrap();
    let enumerate = |a: &H2hAgent, d: usize, j: usize| {
        from_log(
            (0..4)
                .map(|l| {
                    let mut b = a.clone();
                    b.set_category(d, j, l).unwrap();
                    b.log_joint(&s, &words).unwrap()
                })
                .collect(),
        )
    };
    for d in 0..s.len() {
        for j in 0..s[d].n_objects() {
            let got = a.category_conditional(&s, &words, d, j).unwrap();
            assert!(got.tv_distance(&enumerate(&a, d, j)) < 1e-9);
        }
    }
    let j = s[0].attended;
    let target = enumerate(&a, 0, j);
    let mut counts = vec![0.0; 4];
    let mut rng = Rng::new(9);
    for _ in 0..60_000 {
        a.resample_categories(&s, &words, &mut rng).unwrap();
        counts[a.category(0, j)] += 1.0;
    }
    assert!(target.as_slice().iter().all(|p| *p < 0.95));
    let emp = Simplex::from_weights(counts).unwrap();
    assert!(emp.tv_distance(&target) < 0.01);
}
