use rubric_rewards::cli::{run, Env};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    std::process::exit(run(std::env::args_os(), &Env::from_process()));
}
