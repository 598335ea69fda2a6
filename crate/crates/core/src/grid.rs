/// `count` points equally spaced in log10 between `lo` and `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..count)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
                .collect()
        }
    }
}

/// Smoothing grids: candidate basis sizes and smoothing parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SmoothingGrid {
    pub m_grid: Vec<usize>,
    pub zeta_grid: Vec<f64>,
}

impl Default for SmoothingGrid {
    fn default() -> Self {
        Self {
            m_grid: (5..=15).collect(),
            zeta_grid: log_spaced(1e-8, 1.0, 20),
        }
    }
}

pub fn default_lambda_grid() -> Vec<f64> {
    log_spaced(1e-8, 1.0, 25)
}

/// Parses a basis-size grid: `lo-hi` (inclusive) or a comma list.
pub fn parse_m_grid(s: &str) -> Result<Vec<usize>, String> {
    let s = s.trim();
    let bad = |p: &str| format!("invalid basis size '{p}' in '{s}'");
    if let Some((a, b)) = s.split_once('-') {
        let lo: usize = a.trim().parse().map_err(|_| bad(a))?;
        let hi: usize = b.trim().parse().map_err(|_| bad(b))?;
        if lo > hi {
            return Err(format!("empty range '{s}'"));
        }
        return Ok((lo..=hi).collect());
    }
    s.split(',').map(|p| p.trim().parse().map_err(|_| bad(p))).collect()
}

/// Parses a positive real grid: `lo:hi:count` (log-spaced) or a comma list.
pub fn parse_real_grid(s: &str) -> Result<Vec<f64>, String> {
    let s = s.trim();
    let num = |p: &str| -> Result<f64, String> {
        match p.trim().parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
            _ => Err(format!("invalid positive value '{p}' in '{s}'")),
        }
    };
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [lo, hi, n] => {
            let count: usize = n.trim().parse().map_err(|_| format!("invalid count '{n}' in '{s}'"))?;
            if count == 0 {
                return Err(format!("grid '{s}' has no points"));
            }
            Ok(log_spaced(num(lo)?, num(hi)?, count))
        }
        [_] => s.split(',').map(num).collect(),
        _ => Err(format!("expected lo:hi:count or a comma list, found '{s}'")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_specs() {
        assert_eq!(parse_m_grid("5-8").unwrap(), vec![5, 6, 7, 8]);
        assert_eq!(parse_m_grid("4, 9").unwrap(), vec![4, 9]);
        assert!(parse_m_grid("9-4").is_err());
        assert!(parse_m_grid("x").is_err());
        assert_eq!(parse_real_grid("1e-8:1:25").unwrap(), default_lambda_grid());
        assert_eq!(parse_real_grid("0.5,2").unwrap(), vec![0.5, 2.0]);
        assert!(parse_real_grid("0,1").is_err());
        assert!(parse_real_grid("1:2").is_err());
    }

    #[test]
    fn endpoints_and_count() {
        let g = log_spaced(1e-8, 1.0, 25);
        assert_eq!(g.len(), 25);
        assert!((g[0] - 1e-8).abs() < 1e-20);
        assert!((g[24] - 1.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!((g[3] - 1e-7).abs() < 1e-19);
    }
}
