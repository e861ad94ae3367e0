//! Report writers: CSV tables, sorted JSON, run manifests, the two-panel
//! flow summary table and plot data.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::critical::{find_critical_radii, CriticalRadii};
use crate::error::{Error, Result};
use crate::flow::{self, CollapseTarget, FlowConfig, FlowMode, FlowTrajectory};
use crate::geometry::{par_map, RadialState};
use crate::soliton::{SolitonParams, SolitonProfile};

/// 17 significant digits; empty for a missing value.
pub fn fmt_num(x: Option<f64>) -> String {
    match x {
        None => String::new(),
        Some(v) if v.is_nan() => "nan".into(),
        Some(v) if v.is_infinite() => if v > 0.0 { "inf" } else { "-inf" }.into(),
        Some(v) => format!("{v:.16e}"),
    }
}

pub fn csv_string(header: &[&str], rows: &[Vec<Option<f64>>]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row.iter().map(|v| fmt_num(*v))).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("CSV output is ASCII"))
}

/// Pretty JSON with keys sorted at every level and a trailing newline.
pub fn sorted_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json's Map is ordered by key without the preserve_order feature
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn profile_csv(profile: &SolitonProfile) -> Result<String> {
    let rows: Vec<Vec<Option<f64>>> = (0..profile.w_grid.len())
        .map(|i| {
            let s = profile.s_values[i];
            vec![
                Some(profile.w_grid[i]),
                Some(profile.v_values[i]),
                Some(s),
                Some(profile.u_values[i]),
                Some((0.5 * s).exp()),
            ]
        })
        .collect();
    csv_string(&["W", "V", "s", "u", "r"], &rows)
}

pub fn geometry_csv(states: &[RadialState]) -> Result<String> {
    let rows: Vec<Vec<Option<f64>>> = states
        .iter()
        .map(|st| {
            vec![
                Some(st.r),
                Some(st.s),
                Some(st.w),
                Some(st.v),
                Some(st.dv_dw),
                Some(st.lambda),
                Some(st.norm_a2),
                Some(st.norm_h2),
                Some(st.p),
                Some(st.p_prime),
                Some(st.p_double_prime),
            ]
        })
        .collect();
    csv_string(
        &["r", "s", "W", "V", "dV_dW", "lambda", "A2", "H2", "P", "P_prime", "P_double_prime"],
        &rows,
    )
}

pub fn flow_csv(traj: &FlowTrajectory) -> Result<String> {
    let rows: Vec<Vec<Option<f64>>> = traj
        .samples
        .iter()
        .map(|s| vec![Some(s.t), s.sigma, Some(s.r), Some(s.h), Some(s.lambda), Some(s.a2)])
        .collect();
    csv_string(&["t", "sigma", "R", "h", "lambda", "A2"], &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSummary {
    pub mode: FlowMode,
    pub r0: f64,
    #[serde(rename = "T")]
    pub t_horizon: Option<f64>,
    pub target: CollapseTarget,
    /// `None` encodes an infinite maximal time.
    #[serde(rename = "T_prime_ode")]
    pub t_prime_ode: Option<f64>,
    #[serde(rename = "T_prime_quadrature")]
    pub t_prime_quadrature: Option<f64>,
    #[serde(rename = "typeI_constant")]
    pub type_i_constant: Option<f64>,
    /// `2|A(ι_r1)|²` for the stationary RMCF solution, four times `typeI_constant`.
    #[serde(rename = "typeI_constant_2A2")]
    pub type_i_constant_2a2: Option<f64>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl FlowSummary {
    pub fn of(traj: &FlowTrajectory) -> Self {
        Self {
            mode: traj.mode,
            r0: traj.r0,
            t_horizon: (traj.mode == FlowMode::Rmcf).then_some(traj.t_horizon),
            target: traj.target,
            t_prime_ode: finite(traj.t_prime_ode),
            t_prime_quadrature: finite(traj.t_prime_quadrature),
            type_i_constant: traj.type_i_constant,
            type_i_constant_2a2: match (traj.mode, traj.target) {
                (FlowMode::Rmcf, CollapseTarget::Stationary) => traj.type_i_constant.map(|v| 4.0 * v),
                _ => None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestParams {
    pub n: u32,
    pub k: u32,
    pub grid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub params: ManifestParams,
    pub gauge: String,
    pub c: f64,
    pub r1: f64,
    pub r2: f64,
    pub tool_version: String,
    /// RFC 3339, taken from `SOURCE_DATE_EPOCH` (the Unix epoch when unset).
    pub timestamp: String,
    pub outputs: Vec<String>,
}

pub fn build_timestamp() -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse::<i64>().ok())
        .unwrap_or(0);
    time::OffsetDateTime::from_unix_timestamp(secs)
        .unwrap_or(time::OffsetDateTime::UNIX_EPOCH)
        .format(&time::format_description::well_known::Rfc3339)
        .unwrap_or_else(|_| "1970-01-01T00:00:00Z".into())
}

impl RunManifest {
    pub fn new(command: Vec<String>, profile: &SolitonProfile, crit: &CriticalRadii) -> Self {
        Self {
            command,
            params: ManifestParams {
                n: profile.params.n,
                k: profile.params.k,
                grid: profile.params.grid_size,
            },
            gauge: profile.gauge_label(),
            c: profile.c,
            r1: crit.r1,
            r2: crit.r2,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: build_timestamp(),
            outputs: Vec::new(),
        }
    }
}

/// Collects output files in a directory and writes the manifest last.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(path)
    }

    pub fn finish(mut self, mut manifest: RunManifest) -> Result<Vec<String>> {
        self.written.push("manifest.json".into());
        self.written.sort();
        manifest.outputs = self.written.clone();
        std::fs::write(self.dir.join("manifest.json"), sorted_json(&manifest)?)?;
        Ok(self.written)
    }
}

/// Column labels of the two-panel table.
pub const TABLE_COLUMNS: [&str; 5] = ["r<r1", "r1", "r1<r<r2", "r2", "r2<r"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableCell {
    pub maximal_time: String,
    pub collapse_to: String,
    pub blow_up_rate: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableColumn {
    pub label: String,
    pub r0: f64,
    #[serde(rename = "T_prime")]
    pub t_prime: Option<f64>,
    pub cell: TableCell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1 {
    pub n: u32,
    pub k: u32,
    pub c: f64,
    pub r1: f64,
    pub r2: f64,
    #[serde(rename = "T")]
    pub t_horizon: f64,
    pub rmcf: Vec<TableColumn>,
    pub mcf: Vec<TableColumn>,
}

impl TableCell {
    fn new(t: &str, c: &str, b: &str) -> Self {
        Self {
            maximal_time: t.into(),
            collapse_to: c.into(),
            blow_up_rate: b.into(),
        }
    }
}

/// Reference cell contents, for comparison with [`table1`].
pub fn expected_table() -> (Vec<TableCell>, Vec<TableCell>) {
    let rm = vec![
        TableCell::new("T'<T", "S_0", "Type I"),
        TableCell::new("T'=T", "S_0", "Type I"),
        TableCell::new("T'<T", "S_inf", "Type I"),
        TableCell::new("T'<T", "S_inf", "Type I"),
        TableCell::new("T'<T", "S_inf", "Type I"),
    ];
    let m = vec![
        TableCell::new("T'<inf", "S_0", "Type I"),
        TableCell::new("T'<inf", "S_0", "Type I"),
        TableCell::new("T'<inf", "S_0", "Type I"),
        TableCell::new("T'=inf", "---", "---"),
        TableCell::new("T'<inf", "S_inf", "Type I"),
    ];
    (rm, m)
}

/// Cell contents derived from a computed trajectory.
pub fn classify(traj: &FlowTrajectory) -> Result<TableCell> {
    let stationary = traj.target == CollapseTarget::Stationary;
    let maximal_time = match traj.mode {
        FlowMode::Rmcf => {
            if (traj.t_prime_ode - traj.t_horizon).abs() <= 1e-12 * traj.t_horizon {
                "T'=T"
            } else if traj.t_prime_ode < traj.t_horizon {
                "T'<T"
            } else {
                return Err(Error::Validation(format!("maximal time {} exceeds T", traj.t_prime_ode)));
            }
        }
        FlowMode::Mcf => {
            if traj.t_prime_ode.is_finite() {
                "T'<inf"
            } else {
                "T'=inf"
            }
        }
    };
    let first = traj.samples.first().map(|s| s.h).unwrap_or(1.0);
    let last = traj.samples.last().map(|s| s.h).unwrap_or(1.0);
    let collapse_to = match (traj.target, traj.mode) {
        (CollapseTarget::S0, _) => "S_0",
        (CollapseTarget::SInfinity, _) => "S_inf",
        // the fixed orbit of the rescaled flow is carried to the zero section
        (CollapseTarget::Stationary, FlowMode::Rmcf) if last < first => "S_0",
        (CollapseTarget::Stationary, _) => "---",
    };
    let blow_up_rate = if stationary {
        // constant (T-t)|A|² along the stationary Ricci-mean curvature flow
        let steady = traj.type_i_constant.is_some_and(|c0| {
            traj.samples
                .iter()
                .all(|s| ((traj.t_horizon - s.t) * s.a2 - c0).abs() <= 1e-8 * c0.max(1.0))
        });
        if traj.mode == FlowMode::Rmcf && steady {
            "Type I"
        } else {
            "---"
        }
    } else if traj.type_one.is_some() {
        "Type I"
    } else {
        return Err(Error::TypeOne("missing Type-I report".into()));
    };
    Ok(TableCell::new(maximal_time, collapse_to, blow_up_rate))
}

/// Representative radii `{r1/2, r1, (r1+r2)/2, r2, 2 r2}`.
pub fn table_radii(crit: &CriticalRadii) -> [f64; 5] {
    [0.5 * crit.r1, crit.r1, 0.5 * (crit.r1 + crit.r2), crit.r2, 2.0 * crit.r2]
}

pub fn table1(profile: &SolitonProfile, crit: &CriticalRadii, t_horizon: f64) -> Result<Table1> {
    let radii = table_radii(crit);
    let mut jobs = Vec::new();
    for mode in [FlowMode::Rmcf, FlowMode::Mcf] {
        for (i, &r0) in radii.iter().enumerate() {
            jobs.push((mode, i, FlowConfig::new(mode, r0, t_horizon)));
        }
    }
    let results = par_map(&jobs, |(_, _, cfg)| flow::integrate_with(profile, cfg, crit));
    let mut rmcf = Vec::new();
    let mut mcf = Vec::new();
    for ((mode, i, cfg), res) in jobs.iter().zip(results) {
        let traj = res?;
        let col = TableColumn {
            label: TABLE_COLUMNS[*i].to_string(),
            r0: cfg.r0,
            t_prime: finite(traj.t_prime_ode),
            cell: classify(&traj)?,
        };
        match mode {
            FlowMode::Rmcf => rmcf.push(col),
            FlowMode::Mcf => mcf.push(col),
        }
    }
    Ok(Table1 {
        n: profile.n(),
        k: profile.k(),
        c: profile.c,
        r1: crit.r1,
        r2: crit.r2,
        t_horizon,
        rmcf,
        mcf,
    })
}

/// Builds the profile for `(n, k)` and its table.
pub fn table1_for(n: u32, k: u32, grid: usize, t_horizon: f64) -> Result<Table1> {
    let profile = SolitonProfile::build(&SolitonParams::new(n, k).with_grid(grid))?;
    let crit = find_critical_radii(&profile)?;
    table1(&profile, &crit, t_horizon)
}

pub fn table_matches_expected(t: &Table1) -> bool {
    let (rm, m) = expected_table();
    t.rmcf.iter().map(|c| &c.cell).eq(rm.iter()) && t.mcf.iter().map(|c| &c.cell).eq(m.iter())
}

fn markdown_cell(s: &str) -> String {
    match s {
        "T'<inf" => "T'<∞".into(),
        "T'=inf" => "T'=∞".into(),
        "S_0" => "S₀".into(),
        "S_inf" => "S∞".into(),
        other => other.into(),
    }
}

pub fn table1_markdown(tables: &[Table1]) -> String {
    let mut out = String::new();
    for t in tables {
        out.push_str(&format!(
            "## n = {}, k = {}\n\nc = {:.12}, r1 = {:.12}, r2 = {:.12}, T = {}\n\n",
            t.n, t.k, t.c, t.r1, t.r2, t.t_horizon
        ));
        for (title, cols) in [("Ricci-mean curvature flow", &t.rmcf), ("Mean curvature flow", &t.mcf)] {
            out.push_str(&format!("### {title}\n\n| Radius r |"));
            for c in cols.iter() {
                out.push_str(&format!(" {} |", c.label));
            }
            out.push_str("\n|---|");
            out.push_str(&"---|".repeat(cols.len()));
            out.push('\n');
            let rows: [(&str, fn(&TableCell) -> &String); 3] = [
                ("Maximal time T'", |c| &c.maximal_time),
                ("Collapse to", |c| &c.collapse_to),
                ("Blow-up rate", |c| &c.blow_up_rate),
            ];
            for (name, get) in rows {
                out.push_str(&format!("| {name} |"));
                for c in cols.iter() {
                    out.push_str(&format!(" {} |", markdown_cell(get(&c.cell))));
                }
                out.push('\n');
            }
            out.push('\n');
        }
    }
    out
}

/// Two whitespace-separated columns with a `#` header line.
pub fn two_column(xlabel: &str, ylabel: &str, data: &[(f64, f64)]) -> String {
    let mut s = format!("# {xlabel} {ylabel}\n");
    for (x, y) in data {
        s.push_str(&format!("{} {}\n", fmt_num(Some(*x)), fmt_num(Some(*y))));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Linear,
    Log,
}

pub struct Series<'a> {
    pub label: &'a str,
    pub points: &'a [(f64, f64)],
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Self-contained SVG line chart.
pub fn svg_chart(title: &str, xlabel: &str, ylabel: &str, x_axis: Axis, y_axis: Axis, series: &[Series]) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 50.0);
    let tx = |v: f64, a: Axis| if a == Axis::Log { v.log10() } else { v };
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .map(|&(x, y)| (tx(x, x_axis), tx(y, y_axis)))
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect()
        })
        .collect();
    let all = pts.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let py = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    s.push_str(&format!("<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        w / 2.0,
        escape(title)
    ));
    s.push_str(&format!(
        "<rect x=\"{left}\" y=\"{top}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n",
        w - left - right,
        h - top - bottom
    ));
    let tick = |v: f64, a: Axis| {
        if a == Axis::Log {
            format!("1e{}", v.round() as i64)
        } else {
            format!("{v:.3}")
        }
    };
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            px(fx),
            h - bottom + 16.0,
            tick(fx, x_axis)
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
            left - 6.0,
            py(fy) + 4.0,
            tick(fy, y_axis)
        ));
    }
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        (left + w - right) / 2.0,
        h - 12.0,
        escape(xlabel)
    ));
    s.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        (top + h - bottom) / 2.0,
        (top + h - bottom) / 2.0,
        escape(ylabel)
    ));
    for (i, (ser, p)) in series.iter().zip(&pts).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        s.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        let ly = top + 16.0 + 16.0 * i as f64;
        s.push_str(&format!(
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            w - right - 150.0,
            w - right - 130.0
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{}</text>\n",
            w - right - 125.0,
            ly + 4.0,
            escape(ser.label)
        ));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
