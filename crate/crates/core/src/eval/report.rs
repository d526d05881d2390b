use super::experiment::ResultRow;

const HEADERS: [&str; 8] = [
    "Strategy",
    "Beam Width",
    "σ0",
    "Chains",
    "η",
    "NLL↓",
    "NLL/tok↓",
    "BLEU↑",
];

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_else(|| "-".into())
}

/// Plain-text table with one block per strategy (in order of first
/// appearance) and rows sorted by beam width, then σ0, chains and η.
pub fn render_report(rows: &[ResultRow]) -> String {
    let mut groups: Vec<Vec<&ResultRow>> = Vec::new();
    for r in rows {
        match groups
            .iter_mut()
            .find(|g| g[0].cell.strategy == r.cell.strategy)
        {
            Some(g) => g.push(r),
            None => groups.push(vec![r]),
        }
    }
    let key = |x: Option<f64>| x.unwrap_or(f64::NEG_INFINITY);
    for g in &mut groups {
        g.sort_by(|a, b| {
            a.cell
                .beam_width
                .cmp(&b.cell.beam_width)
                .then(key(a.cell.sigma0).total_cmp(&key(b.cell.sigma0)))
                .then(a.cell.chains.cmp(&b.cell.chains))
                .then(key(a.cell.eta).total_cmp(&key(b.cell.eta)))
        });
    }
    let cells: Vec<Vec<Vec<String>>> = groups
        .iter()
        .map(|g| {
            g.iter()
                .map(|r| {
                    vec![
                        r.cell.display_name().to_string(),
                        r.cell.beam_width.to_string(),
                        opt(r.cell.sigma0),
                        r.cell.chains.to_string(),
                        opt(r.cell.eta),
                        format!("{:.4}", r.mean_nll),
                        format!("{:.4}", r.mean_nll_per_token),
                        format!("{:.4}", r.bleu),
                    ]
                })
                .collect()
        })
        .collect();
    let mut widths: Vec<usize> = HEADERS.iter().map(|h| h.chars().count()).collect();
    for row in cells.iter().flatten() {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |fields: &[String]| -> String {
        let parts: Vec<String> = fields
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (f, &w))| {
                let pad = " ".repeat(w - f.chars().count());
                if i == 0 {
                    format!("{f}{pad}")
                } else {
                    format!("{pad}{f}")
                }
            })
            .collect();
        format!("{}\n", parts.join("  ").trim_end())
    };
    let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    let headers: Vec<String> = HEADERS.iter().map(|s| s.to_string()).collect();
    let mut out = line(&headers);
    out.push_str(&"=".repeat(total));
    out.push('\n');
    for (i, g) in cells.iter().enumerate() {
        if i > 0 {
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
        for row in g {
            out.push_str(&line(row));
        }
    }
    out
}
