//! Range flag syntax: `value`, `start:stop` (step 1), or
//! `start:stop:step`, endpoints inclusive within 1e-9.

pub fn parse_range(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let parse = |s: &str| -> Result<f64, String> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| format!("invalid number '{s}' in range '{text}'"))
    };
    let (start, stop, step) = match parts.len() {
        1 => {
            let v = parse(parts[0])?;
            return Ok(vec![v]);
        }
        2 => (parse(parts[0])?, parse(parts[1])?, 1.0),
        3 => (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?),
        _ => return Err(format!("range '{text}' must be value, start:stop, or start:stop:step")),
    };
    if !(step > 0.0) {
        return Err(format!("range step must be positive in '{text}'"));
    }
    if stop < start - 1e-9 {
        return Err(format!("range stop below start in '{text}'"));
    }
    let mut vals = Vec::new();
    let mut i = 0u64;
    loop {
        let v = start + step * i as f64;
        if v > stop + 1e-9 {
            break;
        }
        vals.push(v);
        i += 1;
        if i > 1_000_000 {
            return Err(format!("range '{text}' produces too many values"));
        }
    }
    Ok(vals)
}
