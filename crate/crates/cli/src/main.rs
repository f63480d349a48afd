fn main() {
    if let Err(e) = aoi_cli::run(std::env::args_os()) {
        let msg = e.to_string();
        eprintln!("aoi: {}", msg.trim_end());
        std::process::exit(e.exit_code());
    }
}
