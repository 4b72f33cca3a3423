use qparity::sde::NoiseStream;

fn main() {
    let mut worst = (0u64, 0.0f64);
    for seed in 0..100u64 {
        let mut s = NoiseStream::new(seed, 1e-4);
        let dw1 = s.next_dw();
        if dw1.abs() > worst.1.abs() {
            worst = (seed, dw1);
        }
        if seed >= 94 && seed <= 98 {
            println!("seed {seed}: dW1 = {dw1:+.5} ({:+.2} sigma)", dw1 / 0.01);
        }
    }
    println!("worst first draw: seed {} dW1 = {:+.5} ({:+.2} sigma)", worst.0, worst.1, worst.1 / 0.01);
}
