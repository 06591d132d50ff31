fn main() { println!("{}", unravel_core::placeholder()); }
