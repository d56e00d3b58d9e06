use crate::error::{Error, Result};

fn validate(anchors: &[usize]) -> Result<()> {
    match anchors.first() {
        None => return Err(Error::InvalidAnchors("no anchors".into())),
        Some(&first) if first != 1 => {
            return Err(Error::InvalidAnchors(format!("first anchor is {first}")))
        }
        _ => {}
    }
    if let Some(w) = anchors.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::InvalidAnchors(format!("{} follows {}", w[1], w[0])));
    }
    Ok(())
}

/// Delay contributed by one gap of `g` frames: `1 + 2 + … + g`.
pub fn gap_delay(g: u64) -> u64 {
    g * (g + 1) / 2
}

/// `D = Σ_q g_q (g_q + 1) / 2` over consecutive anchor gaps `g_q = u_q − u_{q−1}`.
pub fn total_delay(anchors: &[usize]) -> Result<u64> {
    validate(anchors)?;
    Ok(anchors
        .windows(2)
        .map(|w| gap_delay((w[1] - w[0]) as u64))
        .sum())
}

/// Delay accrued by frame `t`: the open gap since the latest anchor counts
/// as a partial triangle on top of [`total_delay`].
pub fn partial_delay(anchors: &[usize], t: usize) -> Result<u64> {
    let d = total_delay(anchors)?;
    let last = *anchors.last().expect("validated");
    if t < last {
        return Err(Error::InvalidArgument(format!(
            "frame {t} precedes the latest anchor {last}"
        )));
    }
    Ok(d + gap_delay((t - last) as u64))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Counts delay one waiting frame at a time: a frame τ inside a gap
    /// ending at u waits (u − τ + 1) frames for its feedback.
    fn delay_by_waiting(anchors: &[usize]) -> u64 {
        let mut d = 0;
        for w in anchors.windows(2) {
            for tau in w[0] + 1..=w[1] {
                d += (w[1] - tau + 1) as u64;
            }
        }
        d
    }

    #[test]
    fn hand_cases() {
        assert_eq!(total_delay(&[1, 3, 6]).unwrap(), 9);
        let t = 250;
        let all: Vec<usize> = (1..=t).collect();
        assert_eq!(total_delay(&all).unwrap(), (t - 1) as u64);
        assert_eq!(total_delay(&[1, t]).unwrap(), ((t - 1) * t / 2) as u64);
        assert_eq!(total_delay(&[1]).unwrap(), 0);
    }

    #[test]
    fn matches_waiting_count() {
        let cases: [&[usize]; 4] = [&[1, 2, 9, 10, 30], &[1, 100], &[1, 4, 5, 6, 11], &[1]];
        for a in cases {
            assert_eq!(total_delay(a).unwrap(), delay_by_waiting(a));
        }
    }

    #[test]
    fn partial_cases() {
        assert_eq!(partial_delay(&[1, 3, 6], 6).unwrap(), 9);
        assert_eq!(partial_delay(&[1], 4).unwrap(), 6);
        assert_eq!(partial_delay(&[1, 3], 5).unwrap(), 6);
        assert!(partial_delay(&[1, 3], 2).is_err());
    }

    #[test]
    fn rejects_bad_anchor_lists() {
        assert!(total_delay(&[]).is_err());
        assert!(total_delay(&[2, 3]).is_err());
        assert!(total_delay(&[1, 3, 3]).is_err());
        assert!(total_delay(&[1, 5, 4]).is_err());
    }
}
