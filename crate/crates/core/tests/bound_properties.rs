mod common;

use rand::Rng;
use tonelab::bounds::{
    eigenfield_from_tone, estimators, logderivative_bound, BoundError, BoundOptions, Interval,
    RadialField, DEFAULT_CUTOFF,
};
use tonelab::models::{RadialWeight, SubmersionModel};
use tonelab::sturm_liouville::RadialDomain;
use tonelab::tone::{fundamental_tone, total_space_tone, ToneOptions, ToneResult};

fn field(rng: &mut impl Rng) -> RadialField {
    let c = rng.gen_range(0.1..3.0);
    let d = rng.gen_range(-1.0..1.0);
    let src = match rng.gen_range(0..5) {
        0 => "1".to_string(),
        1 => format!("{c}*t"),
        2 => format!("tanh({c}*t)"),
        3 => format!("{c} + {d}*t"),
        _ => format!("t/(1 + {c}*t^2)"),
    };
    RadialField::parse(&src).unwrap()
}

struct Case {
    model: SubmersionModel,
    domain: RadialDomain,
    total: bool,
}

impl Case {
    fn tone(&self) -> ToneResult {
        let opts = ToneOptions::with_grid(2048);
        if self.total {
            total_space_tone(&self.model, self.domain, 0, &opts).unwrap()
        } else {
            fundamental_tone(self.model.base(), self.domain, &opts).unwrap()
        }
    }

    fn weight(&self) -> &dyn RadialWeight {
        if self.total {
            &self.model
        } else {
            self.model.base()
        }
    }
}

fn cases(count: usize, seed: u64) -> Vec<Case> {
    let mut rng = common::rng(seed);
    (0..count)
        .map(|_| {
            let total = rng.gen_bool(0.5);
            let desc = common::random_base(&mut rng);
            let desc = if total {
                desc.with_fiber(rng.gen_range(1..=2), &common::random_bounded_psi(&mut rng))
            } else {
                desc
            };
            Case {
                model: desc.build().unwrap(),
                domain: common::random_domain(&mut rng),
                total,
            }
        })
        .collect()
}

#[test]
fn lower_bounds_never_exceed_the_tone() {
    let opts = BoundOptions::default();
    let mut rng = common::rng(0xb0_0d);
    let mut informative = 0;
    for case in cases(30, 11) {
        let tone = case.tone();
        let tol = tone.error_estimate + 1e-9 * tone.lambda.max(1.0);
        for _ in 0..4 {
            let x = field(&mut rng);
            for est in estimators() {
                match est.estimate(case.weight(), case.domain.into(), &x, &opts) {
                    Ok(r) => {
                        assert!(
                            r.bound <= tone.lambda + tol,
                            "{} on {:?}: {} > {}",
                            est.name(),
                            case.domain,
                            r.bound,
                            tone.lambda
                        );
                        if r.bound > 0.0 {
                            informative += 1;
                        }
                    }
                    Err(BoundError::HypothesisFailed(_)) => {}
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }
    assert!(informative >= 60, "{informative}");
}

#[test]
fn eigenfield_bound_is_sharp_inside() {
    let opts = BoundOptions::default();
    for case in cases(12, 23) {
        let tone = case.tone();
        let x = eigenfield_from_tone(&tone, DEFAULT_CUTOFF).unwrap();
        let RadialField::Sampled(s) = &x else {
            panic!()
        };
        let (lo, hi) = (s.nodes[0], *s.nodes.last().unwrap());
        let inner = Interval::new(lo, hi).unwrap().shrink(0.1);
        let r = logderivative_bound(case.weight(), inner, &x, &opts).unwrap();
        assert!(
            (r.bound - tone.lambda).abs() < 1e-3 * tone.lambda.max(1.0),
            "{:?}: {} vs {}",
            case.domain,
            r.bound,
            tone.lambda
        );
        assert!(r.bound <= tone.lambda + 1e-6 * tone.lambda.max(1.0));
    }
}
