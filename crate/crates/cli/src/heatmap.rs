//! Self-contained SVG heatmap of per-client benign probabilities,
//! built by string templating so the diagnostic needs no plotting
//! dependency.

use brafl_core::fedsim::RoundRecord;

const CELL: usize = 16;
const LEFT: usize = 56;
const TOP: usize = 40;

/// Renders one cell per (evaluated round, client): bright cells are
/// trusted clients, dark cells rejected ones.
pub fn render_heatmap(records: &[RoundRecord], clients: usize) -> String {
    let rows = records.len();
    let width = LEFT + clients * CELL + 8;
    let height = TOP + rows * CELL + 8;

    let mut svg = String::new();
    svg.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    svg.push_str(
        "<!-- Benign-probability heatmap: cell (t, k) shows pi_k at evaluated round t \
         (clients as columns, rounds as rows). Color scale: grayscale fill \
         rgb(v,v,v) with v = round(255 * pi); pi = 1 (trusted) renders white, \
         pi = 0 (rejected) renders black. -->\n",
    );
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{LEFT}\" y=\"14\" font-family=\"monospace\" font-size=\"11\">client \
         benign probability per round</text>\n"
    ));

    for k in 0..clients {
        if clients <= 20 || k % 2 == 0 {
            let x = LEFT + k * CELL + CELL / 2;
            svg.push_str(&format!(
                "<text x=\"{x}\" y=\"{}\" font-family=\"monospace\" font-size=\"9\" \
                 text-anchor=\"middle\">{k}</text>\n",
                TOP - 4
            ));
        }
    }

    for (row, record) in records.iter().enumerate() {
        let y = TOP + row * CELL;
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"9\" \
             text-anchor=\"end\">{}</text>\n",
            LEFT - 6,
            y + CELL - 4,
            record.round
        ));
        let pi = record.pi.as_deref().unwrap_or(&[]);
        for k in 0..clients {
            let value = pi.get(k).copied().unwrap_or(1.0);
            let v = (value.clamp(0.0, 1.0) * 255.0).round() as u8;
            let x = LEFT + k * CELL;
            svg.push_str(&format!(
                "<rect x=\"{x}\" y=\"{y}\" width=\"{}\" height=\"{}\" \
                 fill=\"rgb({v},{v},{v})\" stroke=\"#888\" stroke-width=\"0.5\"/>\n",
                CELL - 1,
                CELL - 1
            ));
        }
    }

    svg.push_str("</svg>\n");
    svg
}
