/// Efficiency score of one active Head: best just above the threshold,
/// decaying with over-allocation, and a flat penalty below it.
pub fn phi(immersion: f64, threshold: f64) -> f64 {
    if immersion < threshold {
        -1.0
    } else if immersion <= 1.1 * threshold {
        1.5
    } else {
        0.5 - ((immersion - threshold) / threshold).min(0.3)
    }
}

/// Head-level satisfaction indicator.
pub fn satisfied(immersion: f64, request_active: bool, threshold: f64) -> bool {
    request_active && immersion >= threshold
}

/// MSP-level all-or-nothing indicator over the satisfaction flags of its
/// active Heads.
pub fn msp_fulfilled(active_satisfaction: &[bool]) -> bool {
    !active_satisfaction.is_empty() && active_satisfaction.iter().all(|&z| z)
}

/// Whether an executed request counts toward the terminal bonus.
pub fn counts_for_terminal(immersion: f64, i_max: f64) -> bool {
    immersion > 0.0 && immersion <= i_max
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branches() {
        let thr = 0.6;
        assert_eq!(phi(thr, thr), 1.5);
        assert_eq!(phi(1.1 * thr, thr), 1.5);
        assert!(phi(1.1 * thr + 1e-9, thr) < 0.5);
        assert!((phi(1.5 * thr, thr) - 0.2).abs() < 1e-12);
        assert_eq!(phi(thr - 1e-12, thr), -1.0);
        assert_eq!(phi(0.0, thr), -1.0);
        // between 1.1 and 1.3 times the threshold the score decays linearly
        assert!((phi(1.2 * thr, thr) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn indicators() {
        assert!(satisfied(0.6, true, 0.6));
        assert!(!satisfied(0.59, true, 0.6));
        assert!(!satisfied(1.0, false, 0.6));
        assert!(!msp_fulfilled(&[]));
        assert!(msp_fulfilled(&[true, true]));
        assert!(!msp_fulfilled(&[true, false, true]));
        assert!(!counts_for_terminal(0.0, 1.0));
        assert!(counts_for_terminal(1.0, 1.0));
    }
}
