//! SCMA codebooks: storage, loading, symbol-to-codeword mapping and superposition.
//!
//! A codebook for user `j` is a `K x M` complex matrix. Column `m` is the
//! codeword sent when the user's data symbol is `m`; only `N` of the `K` rows
//! (the user's resources) are nonzero.
//!
//! Indices in the Rust API are 0-based. The text format and everything the
//! command line prints use 1-based user, row and symbol numbers.
//!
//! # Text format
//!
//! ```text
//! # comments start with '#'
//! J 6
//! K 4
//! M 4
//!
//! user 1 rows 1 3
//! -1.2078          -0.4022         0.4022           1.2078
//! 0                0               0                0
//! -0.1339-0.3623i  0.7247+1.2078i  -0.7247-1.2078i  0.1339+0.3623i
//! 0                0               0                0
//! ```
//!
//! The header keys `J`, `K`, `M` may come in any order but must precede the
//! first `user` block. Each block starts with `user <j>` (blocks appear in
//! order 1..J), optionally followed by `rows <r1> <r2> ...` declaring the
//! nonzero rows. Exactly `K` lines of `M` whitespace-separated complex
//! literals follow. A complex literal has one of the forms `a`, `bi`, `a+bi`,
//! `a-bi` where `a` and `b` are decimal floats (`.3`, `1e-3` accepted). Values
//! are stored exactly as parsed; nothing is renormalized.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::factor_graph::FactorGraph;

/// One codeword: a length-`K` complex vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Codeword(pub Vec<Complex64>);

impl Codeword {
    pub fn values(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Squared Euclidean norm.
    pub fn energy(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// A single user's codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    user_id: usize,
    /// Row-major, `K` rows of `M` entries.
    entries: Vec<Vec<Complex64>>,
    nonzero_rows: Vec<usize>,
}

impl Codebook {
    /// Builds a codebook and infers its sparsity pattern from the entries.
    ///
    /// `user_id` is 1-based and only used for reporting.
    pub fn new(user_id: usize, entries: Vec<Vec<Complex64>>) -> Result<Self> {
        let pattern: Vec<usize> = entries
            .iter()
            .enumerate()
            .filter(|(_, row)| row.iter().any(|c| *c != Complex64::new(0.0, 0.0)))
            .map(|(k, _)| k)
            .collect();
        Self::with_pattern(user_id, entries, &pattern)
    }

    /// Builds a codebook whose nonzero rows must be exactly `rows` (0-based).
    pub fn with_pattern(user_id: usize, entries: Vec<Vec<Complex64>>, rows: &[usize]) -> Result<Self> {
        let k = entries.len();
        if k == 0 {
            return Err(Error::Dimension(format!("user {user_id}: codebook has no rows")));
        }
        let m = entries[0].len();
        if m < 2 {
            return Err(Error::Dimension(format!(
                "user {user_id}: modulation order {m} is below 2"
            )));
        }
        if let Some((r, row)) = entries.iter().enumerate().find(|(_, row)| row.len() != m) {
            return Err(Error::Dimension(format!(
                "user {user_id}: row {} has {} entries, expected {m}",
                r + 1,
                row.len()
            )));
        }

        let mut pattern = rows.to_vec();
        pattern.sort_unstable();
        pattern.dedup();
        if pattern.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "user {user_id}: codebook has no nonzero rows"
            )));
        }
        if let Some(&r) = pattern.iter().find(|&&r| r >= k) {
            return Err(Error::OutOfRange {
                what: "row",
                index: r + 1,
                max: k,
            });
        }

        let zero = Complex64::new(0.0, 0.0);
        for (r, row) in entries.iter().enumerate() {
            let declared = pattern.binary_search(&r).is_ok();
            if declared {
                if row.iter().all(|c| *c == zero) {
                    return Err(Error::InvalidArgument(format!(
                        "user {user_id}: declared row {} is zero in every codeword",
                        r + 1
                    )));
                }
            } else if let Some(s) = row.iter().position(|c| *c != zero) {
                return Err(Error::Sparsity {
                    user: user_id,
                    row: r + 1,
                    symbol: s + 1,
                });
            }
        }
        for s in 0..m {
            if entries.iter().all(|row| row[s] == zero) {
                return Err(Error::ZeroCodeword {
                    user: user_id,
                    symbol: s + 1,
                });
            }
        }

        Ok(Self {
            user_id,
            entries,
            nonzero_rows: pattern,
        })
    }

    /// 1-based user number this codebook was declared with.
    pub fn user_id(&self) -> usize {
        self.user_id
    }

    pub fn resources(&self) -> usize {
        self.entries.len()
    }

    pub fn order(&self) -> usize {
        self.entries[0].len()
    }

    /// Ascending, 0-based.
    pub fn nonzero_rows(&self) -> &[usize] {
        &self.nonzero_rows
    }

    pub fn entry(&self, row: usize, symbol: usize) -> Complex64 {
        self.entries[row][symbol]
    }

    pub fn rows(&self) -> &[Vec<Complex64>] {
        &self.entries
    }

    pub fn codeword(&self, symbol: usize) -> Codeword {
        Codeword(self.entries.iter().map(|row| row[symbol]).collect())
    }

    /// `(1/M) * sum_m ||x_m||^2`.
    pub fn average_energy(&self) -> f64 {
        let total: f64 = self.entries.iter().flatten().map(|c| c.norm_sqr()).sum();
        total / self.order() as f64
    }
}

/// The `J` codebooks of a system, sharing `K` and `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookSet {
    codebooks: Vec<Codebook>,
    resources: usize,
    order: usize,
}

impl CodebookSet {
    pub fn new(codebooks: Vec<Codebook>) -> Result<Self> {
        let first = codebooks
            .first()
            .ok_or_else(|| Error::InvalidArgument("codebook set is empty".into()))?;
        let (k, m) = (first.resources(), first.order());
        for cb in &codebooks {
            if cb.resources() != k || cb.order() != m {
                return Err(Error::Dimension(format!(
                    "user {} is {}x{}, expected {k}x{m}",
                    cb.user_id,
                    cb.resources(),
                    cb.order()
                )));
            }
        }
        Ok(Self {
            codebooks,
            resources: k,
            order: m,
        })
    }

    /// Parses the codebook text format.
    pub fn parse(source: &str) -> Result<Self> {
        parse_codebook_set(source)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }

    /// Number of users `J`.
    pub fn users(&self) -> usize {
        self.codebooks.len()
    }

    /// Number of resources `K`.
    pub fn resources(&self) -> usize {
        self.resources
    }

    /// Modulation order `M`.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn codebooks(&self) -> &[Codebook] {
        &self.codebooks
    }

    pub fn codebook(&self, user: usize) -> &Codebook {
        &self.codebooks[user]
    }

    /// Codeword of `user` for data `symbol` (both 0-based).
    ///
    /// Symbol `m` carries the two-bit pattern of `m` written MSB first, so for
    /// `M = 4` symbols 0..3 map to `00`, `01`, `10`, `11`.
    pub fn encode(&self, user: usize, symbol: usize) -> Result<Codeword> {
        if user >= self.users() {
            return Err(Error::OutOfRange {
                what: "user",
                index: user + 1,
                max: self.users(),
            });
        }
        if symbol >= self.order {
            return Err(Error::OutOfRange {
                what: "symbol",
                index: symbol + 1,
                max: self.order,
            });
        }
        Ok(self.codebooks[user].codeword(symbol))
    }

    /// Encodes one symbol per user.
    pub fn encode_all(&self, symbols: &[usize]) -> Result<Vec<Codeword>> {
        if symbols.len() != self.users() {
            return Err(Error::Dimension(format!(
                "{} symbols for {} users",
                symbols.len(),
                self.users()
            )));
        }
        symbols.iter().enumerate().map(|(j, &s)| self.encode(j, s)).collect()
    }

    /// Number of users on each resource.
    pub fn resource_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.resources];
        for cb in &self.codebooks {
            for &r in cb.nonzero_rows() {
                deg[r] += 1;
            }
        }
        deg
    }

    /// The factor graph induced by the codebooks' sparsity patterns.
    pub fn factor_graph(&self) -> Result<FactorGraph> {
        let mut f = vec![vec![0u8; self.users()]; self.resources];
        for (j, cb) in self.codebooks.iter().enumerate() {
            for &r in cb.nonzero_rows() {
                f[r][j] = 1;
            }
        }
        FactorGraph::from_matrix(&f)
    }

    /// Checks every codebook's pattern against the corresponding column of `fg`.
    pub fn validate_against_graph(&self, fg: &FactorGraph) -> ValidationReport {
        let mut report = ValidationReport {
            dimensions_match: fg.users() == self.users() && fg.resources() == self.resources,
            users: Vec::with_capacity(self.users()),
        };
        for (j, cb) in self.codebooks.iter().enumerate() {
            let expected = if j < fg.users() {
                fg.user_neighbors(j).to_vec()
            } else {
                Vec::new()
            };
            report.users.push(UserCheck {
                user: j + 1,
                pattern_matches: expected == cb.nonzero_rows(),
                expected_rows: expected,
                actual_rows: cb.nonzero_rows().to_vec(),
                average_energy: cb.average_energy(),
            });
        }
        report
    }

    /// Serializes into the text format. Round-trips through [`CodebookSet::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "J {}", self.users());
        let _ = writeln!(out, "K {}", self.resources);
        let _ = writeln!(out, "M {}", self.order);
        for (j, cb) in self.codebooks.iter().enumerate() {
            out.push('\n');
            let rows: Vec<String> = cb.nonzero_rows().iter().map(|r| (r + 1).to_string()).collect();
            let _ = writeln!(out, "user {} rows {}", j + 1, rows.join(" "));
            for row in cb.rows() {
                let cells: Vec<String> = row.iter().map(|c| format_complex(*c)).collect();
                let _ = writeln!(out, "{}", cells.join("  "));
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Per-user result of [`CodebookSet::validate_against_graph`].
#[derive(Debug, Clone, PartialEq)]
pub struct UserCheck {
    /// 1-based.
    pub user: usize,
    pub pattern_matches: bool,
    pub expected_rows: Vec<usize>,
    pub actual_rows: Vec<usize>,
    pub average_energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub dimensions_match: bool,
    pub users: Vec<UserCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.dimensions_match && self.users.iter().all(|u| u.pattern_matches)
    }

    /// 1-based numbers of users whose pattern disagrees with the graph.
    pub fn failed_users(&self) -> Vec<usize> {
        self.users
            .iter()
            .filter(|u| !u.pattern_matches)
            .map(|u| u.user)
            .collect()
    }
}

/// `sum_j sqrt(P_j) x_j`, componentwise.
pub fn superpose(codewords: &[Codeword], powers: &[f64]) -> Result<Vec<Complex64>> {
    if codewords.len() != powers.len() {
        return Err(Error::Dimension(format!(
            "{} codewords but {} powers",
            codewords.len(),
            powers.len()
        )));
    }
    let k = codewords.first().map_or(0, Codeword::len);
    let mut sum = vec![Complex64::new(0.0, 0.0); k];
    for (cw, &p) in codewords.iter().zip(powers) {
        if cw.len() != k {
            return Err(Error::Dimension(format!(
                "codeword of length {} mixed with length {k}",
                cw.len()
            )));
        }
        if !(p >= 0.0) {
            return Err(Error::InvalidArgument(format!("power {p} is negative")));
        }
        let a = p.sqrt();
        for (s, x) in sum.iter_mut().zip(cw.values()) {
            *s += x * a;
        }
    }
    Ok(sum)
}

/// Parses `a`, `bi`, `a+bi` or `a-bi`.
pub fn parse_complex(token: &str) -> Option<Complex64> {
    let t = token.trim();
    if t.is_empty() {
        return None;
    }
    let Some(body) = t.strip_suffix('i') else {
        return t.parse::<f64>().ok().map(|re| Complex64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    // Split at the last sign that is not leading and not an exponent sign.
    let split = (1..bytes.len())
        .rev()
        .find(|&p| matches!(bytes[p], b'+' | b'-') && !matches!(bytes[p - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(p) => (body[..p].parse::<f64>().ok()?, &body[p..]),
        None => (0.0, body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        s => s.parse::<f64>().ok()?,
    };
    Some(Complex64::new(re, im))
}

pub fn format_complex(c: Complex64) -> String {
    if c.im == 0.0 {
        format!("{}", c.re)
    } else if c.im < 0.0 {
        format!("{}-{}i", c.re, -c.im)
    } else {
        format!("{}+{}i", c.re, c.im)
    }
}

fn parse_codebook_set(source: &str) -> Result<CodebookSet> {
    let perr = |line: usize, message: String| Error::Parse { line, message };

    let mut lines = source
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .peekable();

    let (mut j, mut k, mut m) = (None, None, None);
    while let Some(&(n, line)) = lines.peek() {
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or_default();
        if key == "user" {
            break;
        }
        let value = parts
            .next()
            .and_then(|v| v.parse::<usize>().ok())
            .ok_or_else(|| perr(n, format!("expected `{key} <integer>`")))?;
        if parts.next().is_some() {
            return Err(perr(n, "trailing tokens after header value".into()));
        }
        match key {
            "J" => j = Some(value),
            "K" => k = Some(value),
            "M" => m = Some(value),
            other => return Err(perr(n, format!("unknown header key `{other}`"))),
        }
        lines.next();
    }
    let j = j.ok_or_else(|| perr(0, "missing header `J`".into()))?;
    let k = k.ok_or_else(|| perr(0, "missing header `K`".into()))?;
    let m = m.ok_or_else(|| perr(0, "missing header `M`".into()))?;
    if j == 0 || k == 0 || m < 2 {
        return Err(Error::Dimension(format!("header J={j} K={k} M={m} is degenerate")));
    }

    let mut codebooks = Vec::with_capacity(j);
    while let Some((n, line)) = lines.next() {
        let mut parts = line.split_whitespace();
        if parts.next() != Some("user") {
            return Err(perr(n, "expected a `user` block".into()));
        }
        let id: usize = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| perr(n, "expected `user <index>`".into()))?;
        if id != codebooks.len() + 1 {
            return Err(perr(
                n,
                format!("expected user {}, found user {id}", codebooks.len() + 1),
            ));
        }
        let declared = match parts.next() {
            None => None,
            Some("rows") => {
                let rows = parts
                    .map(|r| match r.parse::<usize>() {
                        Ok(r) if (1..=k).contains(&r) => Ok(r - 1),
                        _ => Err(perr(n, format!("invalid row `{r}`"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Some(rows)
            }
            Some(other) => return Err(perr(n, format!("unexpected token `{other}`"))),
        };

        let mut entries = Vec::with_capacity(k);
        while let Some(&(rn, row)) = lines.peek() {
            if row.starts_with("user") {
                break;
            }
            let values = row
                .split_whitespace()
                .map(|tok| parse_complex(tok).ok_or_else(|| perr(rn, format!("bad complex literal `{tok}`"))))
                .collect::<Result<Vec<_>>>()?;
            if values.len() != m {
                return Err(Error::Dimension(format!(
                    "user {id}: row {} has {} entries, expected M={m}",
                    entries.len() + 1,
                    values.len()
                )));
            }
            entries.push(values);
            lines.next();
        }
        if entries.len() != k {
            return Err(Error::Dimension(format!(
                "user {id}: {} rows, expected K={k}",
                entries.len()
            )));
        }
        let cb = match declared {
            Some(rows) => Codebook::with_pattern(id, entries, &rows)?,
            None => Codebook::new(id, entries)?,
        };
        codebooks.push(cb);
    }
    if codebooks.len() != j {
        return Err(Error::Dimension(format!(
            "header declares J={j} users, found {}",
            codebooks.len()
        )));
    }
    CodebookSet::new(codebooks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_close(a: &[Complex64], b: &[Complex64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).norm() <= tol, "{x} vs {y}");
        }
    }

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("-1"), Some(c(-1.0, 0.0)));
        assert_eq!(parse_complex("0.6+1i"), Some(c(0.6, 1.0)));
        assert_eq!(parse_complex("-0.1109-0.3i"), Some(c(-0.1109, -0.3)));
        assert_eq!(parse_complex("-0.3+.3i"), Some(c(-0.3, 0.3)));
        assert_eq!(parse_complex("2.5i"), Some(c(0.0, 2.5)));
        assert_eq!(parse_complex("-i"), Some(c(0.0, -1.0)));
        assert_eq!(parse_complex("1e-3-2E+1i"), Some(c(1e-3, -20.0)));
        assert_eq!(parse_complex("abc"), None);
        assert_eq!(parse_complex("1+2j"), None);
    }

    #[test]
    fn bundled_table2_shape() {
        let cbs = fixtures::table2();
        assert_eq!((cbs.users(), cbs.resources(), cbs.order()), (6, 4, 4));
        assert_eq!(cbs.resource_degrees(), vec![3; 4]);
    }

    #[test]
    fn bundled_table1_first_entry() {
        let cbs = fixtures::table1();
        assert_eq!(cbs.codebook(0).entry(0, 0), c(-1.0, 0.0));
    }

    #[test]
    fn encode_examples() {
        let cbs = fixtures::table2();
        let cw = cbs.encode(0, 1).unwrap();
        assert_close(
            cw.values(),
            &[c(-0.4022, 0.0), c(0.0, 0.0), c(0.7247, 1.2078), c(0.0, 0.0)],
            0.0,
        );
        let cw = cbs.encode(5, 3).unwrap();
        assert_close(
            cw.values(),
            &[c(0.0, 0.0), c(1.2078, 0.0), c(-0.3623, 0.3623), c(0.0, 0.0)],
            0.0,
        );
        assert!(matches!(
            cbs.encode(0, 4),
            Err(Error::OutOfRange { what: "symbol", .. })
        ));
        assert!(matches!(cbs.encode(6, 0), Err(Error::OutOfRange { what: "user", .. })));
    }

    #[test]
    fn superpose_example_codewords() {
        let cbs = fixtures::table2();
        let cws = cbs.encode_all(&[1, 1, 0, 0, 2, 3]).unwrap();
        let r = superpose(&cws, &[1.0; 6]).unwrap();
        let expected = [
            c(-0.4022, -2.4156),
            c(2.2948, 0.8454),
            c(-0.8454, 1.5701),
            c(0.0941, 0.0),
        ];
        assert_close(&r, &expected, 1.5e-4);
    }

    #[test]
    fn superpose_trivial_cases() {
        let cbs = fixtures::table2();
        let cws = cbs.encode_all(&[0, 1, 2, 3, 0, 1]).unwrap();
        let r = superpose(&cws, &[0.0; 6]).unwrap();
        assert!(r.iter().all(|z| z.norm() == 0.0));

        let one = superpose(&cws[..1], &[4.0]).unwrap();
        let doubled: Vec<_> = cws[0].values().iter().map(|z| z * 2.0).collect();
        assert_close(&one, &doubled, 1e-15);

        assert!(superpose(&cws, &[1.0; 5]).is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let text = "J 2\nK 4\nM 2\nuser 1\n1 -1\n0 0\n1 1\n0 0\nuser 2\n0 0\n1 -1\n0 0\n";
        assert!(matches!(CodebookSet::parse(text), Err(Error::Dimension(_))));
        let text = "J 1\nK 2\nM 2\nuser 1\n1 -1 3\n0 0\n";
        assert!(matches!(CodebookSet::parse(text), Err(Error::Dimension(_))));
    }

    #[test]
    fn zero_codeword_and_sparsity_errors() {
        let text = "J 1\nK 2\nM 2\nuser 1\n1 0\n0 0\n";
        assert_eq!(
            CodebookSet::parse(text),
            Err(Error::ZeroCodeword { user: 1, symbol: 2 })
        );
        let text = "J 1\nK 3\nM 2\nuser 1 rows 1\n1 -1\n0 0.5i\n0 0\n";
        assert_eq!(
            CodebookSet::parse(text),
            Err(Error::Sparsity {
                user: 1,
                row: 2,
                symbol: 2
            })
        );
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "J 1\nK 2\nM 2\nuser 1\n1 x\n0 0\n";
        assert!(matches!(CodebookSet::parse(text), Err(Error::Parse { line: 5, .. })));
        assert!(matches!(CodebookSet::parse("K 2\nM 2\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn validation_against_eq_graph() {
        let cbs = fixtures::table2();
        let fg = fixtures::graph_6x4();
        let report = cbs.validate_against_graph(&fg);
        assert!(report.passed());
        assert_eq!(report.users[0].actual_rows, vec![0, 2]);
    }

    #[test]
    fn validation_names_the_offending_user() {
        // Move user 2's resource-2 row up to row 1.
        let cbs = fixtures::table2();
        let mut books = cbs.codebooks().to_vec();
        let mut rows = books[1].rows().to_vec();
        rows.swap(0, 1);
        books[1] = Codebook::new(2, rows).unwrap();
        let moved = CodebookSet::new(books).unwrap();
        let report = moved.validate_against_graph(&fixtures::graph_6x4());
        assert!(!report.passed());
        assert_eq!(report.failed_users(), vec![2]);
    }

    #[test]
    fn table1_average_energies_by_direct_summation() {
        // Oracle: each user's energy is the sum over its two nonzero rows of
        // the per-row average |x|^2 of the printed constellation values.
        let u1 = (1.0 + 0.333f64.powi(2) * 2.0 + 1.0) / 4.0;
        let u2 = (2.0 * (0.1109f64.powi(2) + 0.09) + 2.0 * (0.36 + 1.0)) / 4.0;
        let u3 = (2.0 * 0.18 + 2.0 * (0.36 + 1.0)) / 4.0;
        let expected = [u1 + u2, u2 + u1, u2 + u3, u1 + u3, u3 + u2, u1 + u3];
        let report = fixtures::table1().validate_against_graph(&fixtures::graph_6x4());
        for (check, want) in report.users.iter().zip(expected) {
            assert!((check.average_energy - want).abs() < 1e-12, "{check:?}");
        }
    }

    #[test]
    fn table2_is_a_common_scaling_of_table1() {
        let t1 = fixtures::table1();
        let t2 = fixtures::table2();
        let mut ratios = Vec::new();
        for (a, b) in t1.codebooks().iter().zip(t2.codebooks()) {
            for (ra, rb) in a.rows().iter().zip(b.rows()) {
                for (x, y) in ra.iter().zip(rb) {
                    for (p, q) in [(x.re, y.re), (x.im, y.im)] {
                        if p != 0.0 {
                            ratios.push(q / p);
                        } else {
                            assert_eq!(q, 0.0);
                        }
                    }
                }
            }
        }
        let fitted = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((fitted - 1.2078).abs() < 1e-3, "{fitted}");
        for r in ratios {
            assert!(r > 0.0 && (r - fitted).abs() < 1e-2, "{r}");
        }
    }

    #[test]
    fn every_loaded_column_is_zero_exactly_off_pattern() {
        for cbs in [
            fixtures::table1(),
            fixtures::table2(),
            fixtures::scma_8x4(),
            fixtures::scma_9x6(),
        ] {
            for cb in cbs.codebooks() {
                for s in 0..cb.order() {
                    let cw = cb.codeword(s);
                    for (r, v) in cw.values().iter().enumerate() {
                        let on = cb.nonzero_rows().contains(&r);
                        assert!(on || v.norm() == 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn text_round_trip() {
        for cbs in [fixtures::table1(), fixtures::table2()] {
            assert_eq!(CodebookSet::parse(&cbs.to_text()).unwrap(), cbs);
        }
    }
}
