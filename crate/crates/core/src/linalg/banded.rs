//! Banded real symmetric LDL^T factorization for spectrum slicing.
//!
//! Counting pivot signs of A - shift*I gives the number of eigenvalues below
//! the shift (Sylvester inertia); the shift must stay off the spectrum.

/// Symmetric banded matrix; `bands[d][i]` stores A[i+d][i] for d = 0..=bw.
#[derive(Debug, Clone)]
pub struct BandedSym {
    pub n: usize,
    pub bw: usize,
    bands: Vec<Vec<f64>>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        let bands = (0..=bw).map(|d| vec![0.0; n.saturating_sub(d)]).collect();
        BandedSym { n, bw, bands }
    }

    /// Entry A[i][j] (|i - j| must be within the bandwidth to be nonzero).
    pub fn at(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        if d > self.bw {
            0.0
        } else {
            self.bands[d][lo]
        }
    }

    /// Symmetric assignment of A[i][j] and A[j][i].
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        assert!(d <= self.bw, "entry ({i},{j}) outside bandwidth {}", self.bw);
        self.bands[d][lo] = value;
    }

    pub fn add_to(&mut self, i: usize, j: usize, value: f64) {
        let old = self.at(i, j);
        self.set(i, j, old + value);
    }
}

/// Number of eigenvalues of `m` strictly below `shift`.
///
/// LDL^T without pivoting. A vanishing pivot only means the shift hits an
/// eigenvalue of a leading principal minor, so it is replaced by a tiny
/// negative value (the usual slicing convention); counts are exact whenever
/// the shift keeps a distance >> eps * scale from the actual spectrum.
pub fn inertia_below(m: &BandedSym, shift: f64) -> usize {
    let n = m.n;
    let bw = m.bw;
    let mut d = vec![0.0; n];
    // l[i] holds L[i][j] for j = i-bw .. i-1 (clamped at 0), fixed stride bw.
    let mut l = vec![0.0; n * bw.max(1)];
    let scale = {
        let mut s = 0.0f64;
        for i in 0..n {
            s = s.max(m.at(i, i).abs() + shift.abs());
        }
        s.max(1e-300)
    };
    let pivmin = f64::EPSILON * f64::EPSILON * scale;
    let mut negatives = 0usize;

    for j in 0..n {
        let lo = j.saturating_sub(bw);
        let mut dj = m.at(j, j) - shift;
        for k in lo..j {
            let ljk = l[j * bw + (k + bw - j)];
            dj -= ljk * ljk * d[k];
        }
        if dj.abs() < pivmin {
            dj = -pivmin;
        }
        d[j] = dj;
        if dj < 0.0 {
            negatives += 1;
        }
        let hi = (j + bw + 1).min(n);
        for i in (j + 1)..hi {
            let mut s = m.at(i, j);
            let lo_i = i.saturating_sub(bw);
            for k in lo_i.max(lo)..j {
                s -= l[i * bw + (k + bw - i)] * d[k] * l[j * bw + (k + bw - j)];
            }
            l[i * bw + (j + bw - i)] = s / dj;
        }
    }
    negatives
}
