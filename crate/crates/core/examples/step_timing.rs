use std::time::Instant;

use opponency::data::{Cifar10Set, Split};
use opponency::model::{build_model, train, ModelConfig};
use opponency::ndnum::{Rng, Tensor};

fn main() {
    let n = 64;
    let mut rng = Rng::new(0);
    let images = Tensor::from_fn(&[n, 32, 32, 3], |_| rng.next_f32());
    let labels = (0..n).map(|i| (i % 10) as u8).collect();
    let set = Cifar10Set { images, labels, split: Split::Train };
    let mut config = ModelConfig::new(32, 2);
    config.epochs = 1;
    config.batch_size = 32;
    let mut model = build_model(&config).unwrap();
    let t = Instant::now();
    train(&mut model, &set, &mut |_| {}).unwrap();
    let per_image = t.elapsed().as_secs_f64() / n as f64;
    println!("{per_image:.4} s/image, ~{:.1} min per 50k epoch", per_image * 50_000.0 / 60.0);
    let t = Instant::now();
    model.activations(&set.images, opponency::model::LayerId::Ventral(2)).unwrap();
    println!("forward to Ventral 2: {:.4} s/image", t.elapsed().as_secs_f64() / n as f64);
}
