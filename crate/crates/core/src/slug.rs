//! URL slugs derived from dataset names.

use alloc::format;
use alloc::string::String;

/// Slugs that would shadow fixed API routes under `/api/datasets/`.
pub const RESERVED_SLUGS: &[&str] = &["recent", "popular"];

/// Lowercase ASCII alphanumerics; every other run of characters becomes one hyphen.
pub fn base_slug(name: &str) -> String {
    let mut slug = String::with_capacity(name.len());
    let mut pending_hyphen = false;
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            if pending_hyphen && !slug.is_empty() {
                slug.push('-');
            }
            pending_hyphen = false;
            slug.push(c.to_ascii_lowercase());
        } else {
            pending_hyphen = true;
        }
    }
    if slug.is_empty() {
        slug.push_str("dataset");
    }
    slug
}

/// The first of `base`, `base-2`, `base-3`, ... that `taken` reports as free.
pub fn canonical_slug(name: &str, taken: impl Fn(&str) -> bool) -> String {
    let base = base_slug(name);
    let free = |s: &str| !taken(s) && !RESERVED_SLUGS.contains(&s);
    if free(&base) {
        return base;
    }
    (2u64..)
        .map(|n| format!("{base}-{n}"))
        .find(|candidate| free(candidate))
        .expect("unbounded suffix search")
}
