use std::path::PathBuf;

fn main() {
    let config_env = std::env::var_os("SPINPHOTON_CONFIG").map(PathBuf::from);
    let code = spinphoton_cli::dispatch(
        std::env::args_os(),
        config_env.as_deref(),
        &mut std::io::stdout(),
        &mut std::io::stderr(),
    );
    std::process::exit(code);
}
