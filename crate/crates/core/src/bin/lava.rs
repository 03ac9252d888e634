use std::io::Write;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| writeln!(buf, "lava {}", record.args()))
        .init();
    // LAVA_THREADS caps the worker pool; 0 or unset lets rayon decide
    if let Some(n) = std::env::var("LAVA_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("could not size the thread pool: {e}");
            }
        }
    }
    std::process::exit(lava::cli::run(std::env::args_os()));
}
