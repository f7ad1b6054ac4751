use barcode::experiment::{run_mean_sweep, Metric, RunOptions};
use barcode::sampling::sample_gaussian_stream;
use barcode::{barcode_metrics, prdc, BarcodeOptions, DistanceMode};

fn in_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let p = sample_gaussian_stream::<f64>(700, 33, 0.0, 8, 0).unwrap();
    let q = sample_gaussian_stream::<f64>(500, 33, 0.4, 8, 1).unwrap();
    for mode in [DistanceMode::Exact, DistanceMode::Streaming] {
        let o = BarcodeOptions {
            mode,
            ..BarcodeOptions::default()
        };
        let one = in_pool(1, || barcode_metrics(&p, &q, &o).unwrap());
        for threads in [2, 3, 8] {
            let many = in_pool(threads, || barcode_metrics(&p, &q, &o).unwrap());
            assert_eq!(one, many, "{mode:?} with {threads} threads");
        }
    }
    let one = in_pool(1, || prdc(&p, &q, 5).unwrap());
    let many = in_pool(4, || prdc(&p, &q, 5).unwrap());
    assert_eq!(one, many);
}

#[test]
fn experiments_do_not_depend_on_thread_count() {
    let o = RunOptions {
        metrics: vec![Metric::Barcode, Metric::Fid],
        ..RunOptions::default()
    };
    let one = in_pool(1, || run_mean_sweep(80, 6, &[-1.0, 0.0, 2.0], 1, &o).unwrap());
    let many = in_pool(4, || run_mean_sweep(80, 6, &[-1.0, 0.0, 2.0], 1, &o).unwrap());
    assert_eq!(one, many);
}
