//! Correspondence-free registration of two object maps: the vehicle map is a
//! rigidly moved, noisy copy of part of the reference plus some spurious
//! objects. No object ids are shared between the maps.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use semloc::map::apply_transform;
use semloc::{register_maps, ClassId, Frame, ObjectMap, PipelineConfig, RigidTransform, SemanticObject};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let reference: Vec<SemanticObject> = (0..120)
        .map(|i| {
            SemanticObject::new(
                i,
                rng.random_range(0..3),
                Vector3::new(rng.random_range(0.0..150.0), rng.random_range(0.0..150.0), rng.random_range(0.0..3.0)),
            )
        })
        .collect();
    let reference = ObjectMap::from_objects(Frame::Reference, reference).unwrap();

    let truth = RigidTransform::from_axis_angle(Vector3::new(0.1, -0.2, 1.0), 2.2, Vector3::new(40.0, -15.0, 1.0));
    let noise = Normal::new(0.0, 0.2).unwrap();
    let mut vehicle: Vec<SemanticObject> = reference
        .iter()
        .filter(|o| o.centroid.x < 80.0)
        .enumerate()
        .map(|(k, o)| {
            let jitter = Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
            SemanticObject {
                id: semloc::ObjectId(1000 + k as u64),
                class: o.class,
                centroid: truth.inverse().apply(&o.centroid) + jitter,
            }
        })
        .collect();
    let shared = vehicle.len();
    for k in 0..20 {
        vehicle.push(SemanticObject {
            id: semloc::ObjectId(5000 + k),
            class: ClassId(rng.random_range(0..3)),
            centroid: truth
                .inverse()
                .apply(&Vector3::new(rng.random_range(0.0..80.0), rng.random_range(0.0..150.0), 0.0)),
        });
    }
    let vehicle = ObjectMap::from_objects(Frame::Vehicle, vehicle).unwrap();
    println!("reference {} objects, vehicle {} objects ({shared} shared, 20 spurious)", reference.len(), vehicle.len());

    let mut cfg = PipelineConfig::kitti();
    cfg.epsilon = 1.0;
    let start = std::time::Instant::now();
    let candidate = register_maps(&reference, &vehicle, &cfg);
    let estimate = candidate.transform.expect("registration succeeded");
    let (dt, dr) = estimate.distance_to(&truth);
    println!(
        "inliers {} (exact clique: {}), rmse {:.3} m, error {dt:.3} m / {dr:.3} deg, {:.1?}",
        candidate.inlier_count,
        candidate.certified_exact,
        candidate.rmse,
        start.elapsed()
    );

    let aligned = apply_transform(&estimate, &vehicle);
    let first = &aligned.objects()[0];
    println!("first vehicle object mapped into the reference frame: {:.2?}", first.centroid.as_slice());
}
