fn main() {
    let toks = prism_core::syntax::tokenize(prism_core::corpus::SECURITY_SOURCE).unwrap();
    match prism_core::syntax::parse_context_file(&toks) {
        Ok(ctx) => println!("ok {} decls", ctx.decls.len()),
        Err(e) => println!("ERR {}", e.rendered()),
    }
}
