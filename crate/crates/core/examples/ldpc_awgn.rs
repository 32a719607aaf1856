//! The rate-1/2, k=1024 LDPC code over QPSK in AWGN: block error rate and
//! mean iteration count against Es/N0.

use otfdm::channel::{add_awgn, NoiseSpec};
use otfdm::coding::{ldpc_build, qpsk_llr, qpsk_map, random_bits, DEFAULT_MAX_ITER};

fn main() -> otfdm::Result<()> {
    let code = ldpc_build(1024, 0.5, 1)?;
    println!("n={} k={} checks={} edges={}", code.n(), code.k(), code.m(), code.edges());
    let blocks = 200;
    println!("{:>8} {:>8} {:>10}", "Es/N0 dB", "BLER", "mean iter");
    for snr_db in [0.0, 1.0, 1.5, 2.0, 2.5] {
        let (mut errors, mut iters) = (0, 0);
        for b in 0..blocks {
            let msg = random_bits(code.k(), b);
            let symbols = qpsk_map(&code.encode(&msg)?)?;
            let noise = NoiseSpec::for_snr(1.0, snr_db, 1000 + b);
            let rx = add_awgn(&symbols, &noise);
            let llr = qpsk_llr(&rx, &vec![noise.sigma2; rx.len()])?;
            let out = code.decode(&llr, DEFAULT_MAX_ITER)?;
            iters += out.iterations;
            if out.message() != &msg[..] {
                errors += 1;
            }
        }
        println!(
            "{snr_db:>8.1} {:>8.3} {:>10.1}",
            errors as f64 / blocks as f64,
            iters as f64 / blocks as f64
        );
    }
    Ok(())
}
