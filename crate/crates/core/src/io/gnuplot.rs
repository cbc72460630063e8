use std::fmt::Write as _;

/// A gnuplot script plotting columns of a comma-separated file (with a
/// header row) to `<csv stem>.png`. Columns are 1-based.
pub fn script(csv_name: &str, title: &str, x: (usize, &str), ys: &[(usize, &str)], log_y: bool) -> String {
    let stem = csv_name.strip_suffix(".csv").unwrap_or(csv_name);
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set datafile commentschars '#'");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set terminal pngcairo size 900,600");
    let _ = writeln!(s, "set output '{stem}.png'");
    let _ = writeln!(s, "set title '{title}'");
    let _ = writeln!(s, "set xlabel '{}'", x.1);
    if log_y {
        let _ = writeln!(s, "set logscale y");
    }
    let plots: Vec<String> = ys
        .iter()
        .map(|(c, label)| format!("'{csv_name}' using {}:{c} with lines title '{label}'", x.0))
        .collect();
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    s
}

/// Script for a trace file: the three coordinates against n.
pub fn trace_script(csv_name: &str, title: &str) -> String {
    script(csv_name, title, (1, "n"), &[(2, "s"), (3, "l"), (4, "t")], false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_script_names_output_and_columns() {
        let s = trace_script("trace_atgd.csv", "ATGD");
        assert!(s.contains("set output 'trace_atgd.png'"));
        assert!(s.contains("using 1:3"));
    }
}
