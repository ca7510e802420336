use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use num_complex::Complex64;
use softq_bench::{epa_codeword, latents, soft_bit_batch};
use softq_core::coder::{ac_decode, ac_encode, SymbolStream};
use softq_core::ldpc::{modem_to_decoder_llr, DEFAULT_MAX_ITER};
use softq_core::modem::Constellation;
use softq_core::quant::{estimate_prob_table, quantize_indices, soft_entropy_with_grad, Codebook, CodebookSpec, TauConvention};
use softq_core::trainer::{batch_gradients, SoftBitAutoencoder, TrainConfig};

fn modem(c: &mut Criterion) {
    let qam = Constellation::new(6).unwrap();
    let h = Complex64::new(0.8, -0.3);
    let y = h * qam.points()[37] + Complex64::new(0.05, 0.02);
    let mut out = [0.0; 6];
    let mut g = c.benchmark_group("modem");
    g.throughput(Throughput::Elements(1));
    g.bench_function("llr 64-QAM", |b| b.iter(|| qam.llr_into(y, h, 0.1, &mut out).unwrap()));
    g.finish();
}

fn ldpc(c: &mut Criterion) {
    let mut g = c.benchmark_group("ldpc");
    for snr in [14.0, 24.0] {
        let (link, t) = epa_codeword(snr);
        let llr = modem_to_decoder_llr(&t.llrs);
        g.bench_function(format!("bp decode EPA {snr} dB"), |b| {
            b.iter(|| link.code().decode_bp(&llr, DEFAULT_MAX_ITER).unwrap())
        });
    }
    g.finish();
}

fn coder(c: &mut Criterion) {
    let cb = Codebook::new(CodebookSpec::default()).unwrap();
    let z = latents(10_000);
    let p = estimate_prob_table(&z, &cb).unwrap();
    let stream = SymbolStream::from_indices(&quantize_indices(&z, &cb), cb.len()).unwrap();
    let blob = ac_encode(&stream, &p).unwrap();
    let mut g = c.benchmark_group("coder");
    g.throughput(Throughput::Elements(stream.len() as u64));
    g.bench_function("encode 10k", |b| b.iter(|| ac_encode(&stream, &p).unwrap()));
    g.bench_function("decode 10k", |b| b.iter(|| ac_decode(&blob, &p).unwrap()));
    g.finish();
}

fn entropy(c: &mut Criterion) {
    let cb = Codebook::new(CodebookSpec::default()).unwrap();
    let z = latents(3 * 1024);
    let p = estimate_prob_table(&z, &cb).unwrap();
    let mut g = c.benchmark_group("soft entropy");
    g.throughput(Throughput::Elements(z.len() as u64));
    for tau in [40.0, 295.0] {
        g.bench_function(format!("value+grad tau {tau}"), |b| {
            b.iter(|| soft_entropy_with_grad(&z, &cb, tau, &p, TauConvention::default()).unwrap())
        });
    }
    g.finish();
}

fn training(c: &mut Criterion) {
    let cfg = TrainConfig::default();
    let model = SoftBitAutoencoder::glorot(6, cfg.codebook, &mut softq_core::link::stream_rng(1, 0, 0)).unwrap();
    let x = soft_bit_batch(cfg.batch_size, 6);
    let mut g = c.benchmark_group("training");
    g.throughput(Throughput::Elements(cfg.batch_size as u64));
    g.bench_function("batch gradients K=6", |b| {
        b.iter_batched(|| x.clone(), |x| batch_gradients(&model, &x, true, 0.01, 40.0, &cfg).unwrap(), BatchSize::LargeInput)
    });
    g.finish();
}

criterion_group!(benches, modem, ldpc, coder, entropy, training);
criterion_main!(benches);
