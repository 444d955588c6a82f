use subtle::ConstantTimeEq;

use crate::config::ModeratorToken;

/// Checks an `Authorization` header against the configured moderator tokens.
///
/// Returns the label of the matching moderator. Every token is compared in
/// constant time and all of them are always checked.
pub fn authorize_moderator<'a>(
    authorization: Option<&str>,
    tokens: &'a [ModeratorToken],
) -> Option<&'a str> {
    let presented = authorization?.strip_prefix("Bearer ")?.trim();
    if presented.is_empty() {
        return None;
    }
    let mut found = None;
    for t in tokens {
        if bool::from(t.token.as_bytes().ct_eq(presented.as_bytes())) {
            found = Some(t.label.as_str());
        }
    }
    found
}
