fn main() {
    ds2l::cli::run();
}
