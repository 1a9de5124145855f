use std::process::ExitCode;

fn main() -> ExitCode {
    // SLSADA_THREADS caps the repeat/sweep worker pool. BLAS itself is
    // pinned to one thread by the library unless OPENBLAS_NUM_THREADS is
    // set explicitly.
    if let Some(threads) = std::env::var("SLSADA_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    ExitCode::from(slsada::cli::main_with(std::env::args_os()) as u8)
}
