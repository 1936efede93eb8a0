use ktsecret::encoding::{encode, make_radial_mask, KtData};
use ktsecret::learn::{secret_infer, secret_train, SecretConfig, UnsupervisedSet};
use ktsecret::neural::NetworkParams;
use ktsecret::phantom::{corrupt, synthesize, PhantomSpec};

fn sampled_residual(d: &KtData, image: &ktsecret::DynamicImage) -> f64 {
    encode(image, d.mask())
        .unwrap()
        .samples()
        .sub(d.samples())
        .norm()
}

#[test]
fn trained_network_fits_acquired_samples_better_than_the_zero_network() {
    let spec = PhantomSpec::default();
    let data: Vec<KtData> = (0..3)
        .map(|i| {
            let truth = synthesize(&spec.with_seed(i)).unwrap();
            let mask = make_radial_mask(spec.t, spec.h, spec.w, 6.0, i).unwrap();
            corrupt(&truth, &mask, 0.01, i).unwrap()
        })
        .collect();
    let cfg = SecretConfig {
        epochs: 100,
        lr: 1e-3,
        ..SecretConfig::default()
    };
    let (theta, _) = secret_train(&UnsupervisedSet::new(data.clone()), None, &cfg).unwrap();
    let zero = NetworkParams::zeros(theta.config()).unwrap();
    for d in &data {
        let trained = sampled_residual(d, &secret_infer(d, &theta).unwrap());
        let baseline = sampled_residual(d, &secret_infer(d, &zero).unwrap());
        assert!(
            trained < baseline,
            "trained {trained} vs zero network {baseline}"
        );
    }
}

#[test]
fn self_supervised_training_is_reproducible() {
    let spec = PhantomSpec::default();
    let truth = synthesize(&spec).unwrap();
    let mask = make_radial_mask(spec.t, spec.h, spec.w, 10.0, 0).unwrap();
    let set = UnsupervisedSet::new(vec![corrupt(&truth, &mask, 0.0, 0).unwrap()]);
    let cfg = SecretConfig {
        epochs: 3,
        base_channels: 4,
        seed: 9,
        ..SecretConfig::default()
    };
    let (a, la) = secret_train(&set, None, &cfg).unwrap();
    let (b, lb) = secret_train(&set, None, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(la.final_train_loss.to_bits(), lb.final_train_loss.to_bits());
}
