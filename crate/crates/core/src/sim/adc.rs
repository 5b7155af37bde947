//! Amplifier + 12-bit ADC front end.

pub const AMP_GAIN: f64 = 5.5;
pub const AMP_BIAS_V: f64 = 1.0;
pub const ADC_REF_V: f64 = 3.3;
pub const ADC_MAX: u16 = 4095;

/// Counts per volt of microphone output (after amplification).
pub const COUNTS_PER_VOLT: f64 = AMP_GAIN * ADC_MAX as f64 / ADC_REF_V;

/// Converts a microphone voltage to ADC counts. Out-of-range values saturate.
pub fn adc_quantize(voltage: f64) -> u16 {
    let counts = ((AMP_GAIN * voltage + AMP_BIAS_V) / ADC_REF_V * ADC_MAX as f64).round();
    if counts.is_nan() {
        return 0;
    }
    counts.clamp(0.0, ADC_MAX as f64) as u16
}

/// Voltage that produces a deviation of `counts` from the zero-volt level.
pub fn counts_to_volts(counts: f64) -> f64 {
    counts / COUNTS_PER_VOLT
}
