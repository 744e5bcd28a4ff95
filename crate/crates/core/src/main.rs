fn main() {
    std::process::exit(crn_neuron::cli::run(std::env::args_os()));
}
