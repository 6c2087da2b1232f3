//! Grid and count syntax shared by the subcommands.

/// `start:stop:step` (stop inclusive) or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.len() {
        1 => s
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| format!("bad number {x:?} in {s:?}")))
            .collect(),
        3 => {
            let num = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("bad number {x:?} in {s:?}"));
            let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
                return Err(format!("grid {s:?} needs start <= stop and step > 0"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            if count > 1_000_000 {
                return Err(format!("grid {s:?} has too many points"));
            }
            Ok((0..count).map(|k| round12(start + k as f64 * step)).collect())
        }
        _ => Err(format!("grid {s:?} is neither start:stop:step nor a list")),
    }
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Counts written as integers or in float notation (`1e6`).
pub fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    let x: f64 = s.parse().map_err(|_| format!("bad count {s:?}"))?;
    if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 {
        Ok(x as u64)
    } else {
        Err(format!("count {s:?} is not a nonnegative integer"))
    }
}

/// Comma-separated unsigned integers.
pub fn parse_list(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|x| x.trim().parse::<usize>().map_err(|_| format!("bad integer {x:?}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let g = parse_grid("0.1:6:0.1").unwrap();
        assert_eq!(g.len(), 60);
        assert_eq!(g[2], 0.3);
        assert_eq!(*g.last().unwrap(), 6.0);
        assert_eq!(parse_grid("7:8:1").unwrap(), vec![7.0, 8.0]);
        assert_eq!(parse_grid("1, 2.5").unwrap(), vec![1.0, 2.5]);
        assert!(parse_grid("1:0:1").is_err());
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }

    #[test]
    fn counts() {
        assert_eq!(parse_count("1e6").unwrap(), 1_000_000);
        assert_eq!(parse_count("2500").unwrap(), 2500);
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
    }
}
