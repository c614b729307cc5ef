fn main() {
    std::process::exit(kanlab::run());
}
