fn main() {
    // placeholder while the core library lands
}
