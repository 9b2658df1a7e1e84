fn main() {
    // CLI is assembled after the library settles.
}
