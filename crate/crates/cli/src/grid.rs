//! Grid and count flag parsing.

/// Either an inclusive arithmetic range or an explicit list.
#[derive(Clone, Debug, PartialEq)]
pub enum Grid {
    Range { start: f64, stop: f64, step: f64 },
    List(Vec<f64>),
}

fn number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    s.parse::<f64>().map_err(|_| format!("not a number: {s:?}"))
}

/// Removes the rounding noise of `start + k * step`, so `1.78` prints as `1.78`.
fn tidy(x: f64) -> f64 {
    let digits = 12 - x.abs().log10().ceil().max(0.0) as i32;
    let scale = 10f64.powi(digits);
    (x * scale).round() / scale
}

impl Grid {
    pub fn parse(spec: &str) -> Result<Self, String> {
        let spec = spec.trim();
        if spec.is_empty() {
            return Ok(Grid::List(Vec::new()));
        }
        if spec.contains(':') {
            let parts: Vec<&str> = spec.split(':').collect();
            let [start, stop, step] = parts[..] else {
                return Err(format!("range grid must be start:stop:step, got {spec:?}"));
            };
            let (start, stop, step) = (number(start)?, number(stop)?, number(step)?);
            if !(start.is_finite() && stop.is_finite() && step.is_finite() && step > 0.0) {
                return Err(format!("invalid range grid {spec:?}"));
            }
            if stop < start {
                return Err(format!("range grid stop {stop} is below start {start}"));
            }
            if (stop - start) / step > 1e7 {
                return Err(format!("range grid {spec:?} has too many points"));
            }
            return Ok(Grid::Range { start, stop, step });
        }
        spec.split(',').map(number).collect::<Result<_, _>>().map(Grid::List)
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Range { start, stop, step } => {
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                (0..count).map(|k| tidy(start + k as f64 * step)).collect()
            }
        }
    }

    pub fn integers(&self) -> Result<Vec<u32>, String> {
        self.values()
            .into_iter()
            .map(|x| {
                if x.fract() == 0.0 && (0.0..=u32::MAX as f64).contains(&x) {
                    Ok(x as u32)
                } else {
                    Err(format!("grid value {x} is not a non-negative integer"))
                }
            })
            .collect()
    }
}

/// Parses `1000000`, `1e6` or `1_000_000`.
pub fn parse_count(s: &str) -> Result<u64, String> {
    let cleaned = s.trim().replace('_', "");
    if let Ok(n) = cleaned.parse::<u64>() {
        return Ok(n);
    }
    match cleaned.parse::<f64>() {
        Ok(x) if x.is_finite() && x >= 0.0 && x.fract() == 0.0 && x <= u64::MAX as f64 => Ok(x as u64),
        _ => Err(format!("not a non-negative integer: {s:?}")),
    }
}
