//! End-to-end library flow on synthetic blobs: train under each loss, export
//! eval-mode latents, cluster them, and sanity-check the metric suite.

use arlab::cluster::evaluate_latents;
use arlab::data::{make_blobs, split};
use arlab::linalg::{pca_project, Rng};
use arlab::losses::{LossConfig, LossVariant};
use arlab::network::NetworkState;
use arlab::optim::{latents, split_accuracy, train, TrainSettings};

#[test]
fn train_export_cluster_round_trip() {
    let mut data_rng = Rng::new(40);
    let ds = make_blobs(4, 80, 8, 9.0, 1.0, &mut data_rng).unwrap();
    let ds = split(&ds, 0.15, 0.15, &mut data_rng).unwrap();

    for variant in [
        LossVariant::Cce,
        LossVariant::Center,
        LossVariant::CosineCorel,
        LossVariant::GaussianCorel,
    ] {
        let mut rng = Rng::new(41);
        let net = NetworkState::init(&[8, 24, 12], 0.1, 0.0, &mut rng);
        let cfg = LossConfig::new(variant);
        let settings = TrainSettings {
            epochs: 25,
            batch_size: 32,
            learning_rate: 3e-3,
        };
        let report = train(&ds, net, &cfg, &settings, &mut rng).unwrap();
        assert!(!report.diverged, "{} diverged", variant.name());

        let best = &report.checkpoint;
        let test_acc = split_accuracy(&best.network, &best.output_weights, &cfg, &ds, &ds.split.test);
        assert!(
            test_acc > 0.95,
            "{}: test accuracy {test_acc}",
            variant.name()
        );

        let (latent, labels) = latents(&best.network, &ds, &ds.split.test);
        assert_eq!(latent.rows(), ds.split.test.len());
        assert_eq!(latent.cols(), 12);

        let (km, gm) = evaluate_latents(&latent, &labels, 4, &mut Rng::new(7)).unwrap();
        assert!(
            km.aligned_accuracy > 0.9,
            "{}: kmeans accuracy {}",
            variant.name(),
            km.aligned_accuracy
        );
        assert!(gm.aligned_accuracy > 0.8);
        assert!(km.ari > 0.6);
        assert!(km.v_measure > 0.6);

        let pca = pca_project(&latent, 2).unwrap();
        assert_eq!(pca.projected.shape(), (latent.rows(), 2));
    }
}

#[test]
fn centers_track_latent_means_under_center_loss() {
    let mut data_rng = Rng::new(50);
    let ds = make_blobs(3, 60, 6, 8.0, 0.6, &mut data_rng).unwrap();
    let ds = split(&ds, 0.2, 0.2, &mut data_rng).unwrap();
    let mut rng = Rng::new(51);
    let net = NetworkState::init(&[6, 16, 8], 0.1, 0.0, &mut rng);
    let cfg = LossConfig::new(LossVariant::Center);
    let settings = TrainSettings {
        epochs: 30,
        batch_size: 32,
        learning_rate: 3e-3,
    };
    let report = train(&ds, net, &cfg, &settings, &mut rng).unwrap();
    let centers = report.checkpoint.centers.as_ref().expect("center loss saves centers");

    // After training, each running center should sit near the mean latent of
    // its class (the regularizer pulls latents toward it and the update rule
    // pulls it toward the latents).
    let (latent, labels) = latents(&report.checkpoint.network, &ds, &ds.split.train);
    for class in 0..3 {
        let members: Vec<usize> = (0..latent.rows()).filter(|&i| labels[i] == class).collect();
        let mut mean = vec![0.0; latent.cols()];
        for &i in &members {
            for (m, &v) in mean.iter_mut().zip(latent.row(i)) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= members.len() as f64;
        }
        let dist = arlab::linalg::sq_dist(&mean, centers.row(class)).sqrt();
        let scale = mean.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        assert!(
            dist / scale < 0.5,
            "class {class}: center is {dist} from the latent mean (scale {scale})"
        );
    }
}
