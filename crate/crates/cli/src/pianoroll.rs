//! Piano-roll rendering: one SVG rectangle per note, x spanning
//! onset→offset, y by pitch, opacity by velocity.

use cadenza_core::midi::MidiNote;

const PX_PER_SECOND: f64 = 100.0;
const ROW_HEIGHT: f64 = 4.0;
const PITCH_ROWS: f64 = 128.0;
const MARGIN: f64 = 8.0;

pub fn render_svg(notes: &[MidiNote]) -> String {
    let duration = notes.iter().map(|n| n.offset).fold(1.0f64, f64::max);
    let width = duration * PX_PER_SECOND + 2.0 * MARGIN;
    let height = PITCH_ROWS * ROW_HEIGHT + 2.0 * MARGIN;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{width:.0}\" height=\"{height:.0}\" fill=\"#ffffff\"/>\n"
    ));
    for note in notes {
        let x = MARGIN + note.onset * PX_PER_SECOND;
        let w = ((note.offset - note.onset) * PX_PER_SECOND).max(0.5);
        let y = MARGIN + (127.0 - note.pitch as f64) * ROW_HEIGHT;
        let opacity = 0.35 + 0.65 * (note.velocity as f64 / 127.0);
        svg.push_str(&format!(
            "  <rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{ROW_HEIGHT:.2}\" \
             fill=\"#3a6ea5\" fill-opacity=\"{opacity:.3}\"/>\n"
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_rect_per_note_plus_background() {
        let notes = vec![
            MidiNote::new(60, 0.0, 0.5, 80).unwrap(),
            MidiNote::new(64, 0.5, 1.0, 40).unwrap(),
            MidiNote::new(67, 1.0, 1.5, 127).unwrap(),
        ];
        let svg = render_svg(&notes);
        assert_eq!(svg.matches("<rect").count(), notes.len() + 1);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn output_is_deterministic() {
        let notes = vec![MidiNote::new(72, 0.25, 0.75, 90).unwrap()];
        assert_eq!(render_svg(&notes), render_svg(&notes));
    }

    #[test]
    fn higher_pitch_sits_higher_on_the_page() {
        let low = render_svg(&[MidiNote::new(30, 0.0, 1.0, 64).unwrap()]);
        let high = render_svg(&[MidiNote::new(100, 0.0, 1.0, 64).unwrap()]);
        let y_of = |svg: &str| -> f64 {
            let marker = "y=\"";
            let idx = svg.rfind(marker).unwrap();
            svg[idx + 3..].split('"').next().unwrap().parse().unwrap()
        };
        assert!(y_of(&high) < y_of(&low));
    }
}
