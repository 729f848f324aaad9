//! CSV and SVG artifacts.

use std::fmt::Write as _;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::dynamics::Trajectory;
use crate::graph::{NodeId, SignedDigraph};

#[derive(Debug, Error)]
pub enum OutputError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("nothing selected to plot")]
    EmptySelection,
    #[error("trajectory has no samples")]
    EmptyTrajectory,
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// `t, x_1..x_N, y_1..y_M`, one row per recorded sample.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, w: W) -> Result<(), OutputError> {
    let n = traj.states.first().map_or(0, |s| s.len());
    let m = traj.outputs.first().map_or(0, |s| s.len());
    let mut wr = csv::Writer::from_writer(w);
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("x_{i}")))
        .chain((1..=m).map(|i| format!("y_{i}")))
        .collect();
    wr.write_record(&header)?;
    for ((t, x), y) in traj.times.iter().zip(&traj.states).zip(&traj.outputs) {
        let row: Vec<String> = std::iter::once(num(*t))
            .chain(x.iter().map(|v| num(*v)))
            .chain(y.iter().map(|v| num(*v)))
            .collect();
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

/// Edge list `src, dst, weight` of one slot's weight matrix.
pub fn write_weights_csv<W: Write>(g: &SignedDigraph, a: &DMatrix<f64>, w: W) -> Result<(), OutputError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["src", "dst", "weight"])?;
    for e in g.edges() {
        wr.write_record([g.label(e.src), g.label(e.dst), &num(a[(e.dst, e.src)])])?;
    }
    wr.flush()?;
    Ok(())
}

/// `t, u_1..u_m` samples of a steering input.
pub fn write_input_csv<W: Write>(samples: &[(f64, DVector<f64>)], w: W) -> Result<(), OutputError> {
    let m = samples.first().map_or(0, |(_, u)| u.len());
    let mut wr = csv::Writer::from_writer(w);
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=m).map(|i| format!("u_{i}")))
        .collect();
    wr.write_record(&header)?;
    for (t, u) in samples {
        let row: Vec<String> = std::iter::once(num(*t)).chain(u.iter().map(|v| num(*v))).collect();
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

fn parse_field(rec: &csv::StringRecord, i: usize, row: usize) -> Result<f64, OutputError> {
    let s = rec.get(i).ok_or_else(|| OutputError::Row {
        row,
        message: format!("missing column {}", i + 1),
    })?;
    s.trim().parse().map_err(|_| OutputError::Row {
        row,
        message: format!("`{s}` is not a number"),
    })
}

/// Waypoints `slot_index, x_1..x_N` with a header row.
pub fn read_waypoints_csv<R: Read>(r: R, n: usize) -> Result<Vec<(usize, DVector<f64>)>, OutputError> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut out = Vec::new();
    for (k, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = k + 2;
        if rec.len() != n + 1 {
            return Err(OutputError::Row {
                row,
                message: format!("expected {} columns, found {}", n + 1, rec.len()),
            });
        }
        let slot = rec[0].parse().map_err(|_| OutputError::Row {
            row,
            message: format!("slot index `{}` is not a non-negative integer", &rec[0]),
        })?;
        let x = (1..=n).map(|i| parse_field(&rec, i, row)).collect::<Result<Vec<_>, _>>()?;
        out.push((slot, DVector::from_vec(x)));
    }
    Ok(out)
}

pub fn write_waypoints_csv<W: Write>(wps: &[(usize, DVector<f64>)], w: W) -> Result<(), OutputError> {
    let n = wps.first().map_or(0, |(_, x)| x.len());
    let mut wr = csv::Writer::from_writer(w);
    let header: Vec<String> = std::iter::once("slot_index".to_string())
        .chain((1..=n).map(|i| format!("x_{i}")))
        .collect();
    wr.write_record(&header)?;
    for (p, x) in wps {
        let row: Vec<String> = std::iter::once(p.to_string()).chain(x.iter().map(|v| num(*v))).collect();
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

/// Points `p1, p2` with a header row; an optional third column holds
/// integer labels.
pub fn read_points_csv<R: Read>(r: R) -> Result<(Vec<[f64; 2]>, Option<Vec<usize>>), OutputError> {
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(r);
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    let mut labelled = None;
    for (k, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = k + 2;
        let has = match rec.len() {
            2 => false,
            3 => true,
            c => {
                return Err(OutputError::Row {
                    row,
                    message: format!("expected 2 or 3 columns, found {c}"),
                })
            }
        };
        if *labelled.get_or_insert(has) != has {
            return Err(OutputError::Row {
                row,
                message: "label column present on some rows only".into(),
            });
        }
        pts.push([parse_field(&rec, 0, row)?, parse_field(&rec, 1, row)?]);
        if has {
            labels.push(rec[2].parse().map_err(|_| OutputError::Row {
                row,
                message: format!("label `{}` is not a non-negative integer", &rec[2]),
            })?);
        }
    }
    Ok((pts, labelled.unwrap_or(false).then_some(labels)))
}

/// What to plot.
#[derive(Clone, Debug, PartialEq)]
pub enum Selection {
    States(Vec<NodeId>),
    /// Edges as `(src, dst)`; each series is piecewise constant over slots.
    Weights(Vec<(NodeId, NodeId)>),
}

impl Selection {
    pub fn all_states(g: &SignedDigraph) -> Self {
        Selection::States((0..g.node_count()).collect())
    }

    pub fn all_weights(g: &SignedDigraph) -> Self {
        Selection::Weights(g.edges().iter().map(|e| (e.src, e.dst)).collect())
    }
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];

/// Line plot of the selected series with axes and a legend.
pub fn emit_svg(traj: &Trajectory, g: &SignedDigraph, sel: &Selection) -> Result<String, OutputError> {
    if traj.times.is_empty() {
        return Err(OutputError::EmptyTrajectory);
    }
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    match sel {
        Selection::States(nodes) => {
            for &v in nodes {
                let pts = traj.times.iter().zip(&traj.states).map(|(&t, x)| (t, x[v])).collect();
                series.push((format!("x {}", g.label(v)), pts));
            }
        }
        Selection::Weights(edges) => {
            let bounds = &traj.slot_boundaries;
            for &(s, d) in edges {
                let mut pts = Vec::new();
                for (p, a) in traj.weights.iter().enumerate() {
                    let w = a[(d, s)];
                    pts.push((traj.times[bounds[p]], w));
                    pts.push((traj.times[bounds[p + 1]], w));
                }
                if pts.iter().any(|&(_, w)| w != 0.0) {
                    series.push((format!("a {}->{}", g.label(s), g.label(d)), pts));
                }
            }
        }
    }
    if series.is_empty() {
        return Err(OutputError::EmptySelection);
    }
    let (w, h, ml, mr, mt, mb) = (800.0, 480.0, 60.0, 160.0, 20.0, 40.0);
    let t0 = traj.times[0];
    let t1 = *traj.times.last().unwrap();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, pts) in &series {
        for &(_, y) in pts {
            lo = lo.min(y);
            hi = hi.max(y);
        }
    }
    if hi - lo < 1e-12 {
        lo -= 1.0;
        hi += 1.0;
    }
    let span_t = if t1 > t0 { t1 - t0 } else { 1.0 };
    let sx = |t: f64| ml + (t - t0) / span_t * (w - ml - mr);
    let sy = |y: f64| mt + (hi - y) / (hi - lo) * (h - mt - mb);
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    let (x0, x1, y0, y1) = (ml, w - mr, mt, h - mb);
    writeln!(out, r#"<path d="M{x0} {y0}V{y1}H{x1}" fill="none" stroke="black"/>"#).unwrap();
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let t = t0 + f * span_t;
        let y = lo + f * (hi - lo);
        writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.3}</text>"#,
            sx(t),
            y1 + 15.0,
            t
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
            x0 - 4.0,
            sy(y) + 4.0,
            y
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">t (s)</text>"#,
        (x0 + x1) / 2.0,
        h - 5.0
    )
    .unwrap();
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let coords: Vec<String> = pts.iter().map(|&(t, y)| format!("{:.2},{:.2}", sx(t), sy(y))).collect();
        writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1" points="{}"/>"#,
            coords.join(" ")
        )
        .unwrap();
        let ly = mt + 14.0 * k as f64;
        writeln!(
            out,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            x1 + 10.0,
            x1 + 30.0,
            x1 + 34.0,
            ly + 4.0,
            escape(name)
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate, InputSignal, ModelParams, SimOptions};
    use crate::graph::{Edge, InputNode, Sign, WeightBounds};

    fn run(slots: usize) -> (SignedDigraph, Trajectory) {
        let g = SignedDigraph::new(
            vec!["a".into(), "b".into()],
            vec![Edge {
                src: 0,
                dst: 1,
                sign: Sign::Excitatory,
                weight: 0.5,
            }],
            WeightBounds::symmetric(0.1, 1.2),
            vec![InputNode { node: 0, gain: 1.0 }],
            vec![1],
        )
        .unwrap();
        let p = ModelParams {
            c_n: 5.0,
            c_a_plus: 0.98,
            c_a_minus: 0.98,
            theta: 0.1,
            tau: 0.2,
            dt: 1e-3,
            plasticity: Default::default(),
            u_max: 1.0,
        };
        let opts = SimOptions {
            sample_stride: 100,
            mask: None,
        };
        let t = simulate(&g, &p, &[InputSignal::Constant { value: 1.0 }], &DVector::zeros(2), slots, &opts).unwrap();
        (g, t)
    }

    #[test]
    fn trajectory_header_and_rows() {
        let (_, t) = run(2);
        let mut buf = Vec::new();
        write_trajectory_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,x_1,x_2,y_1"));
        assert_eq!(lines.count(), t.times.len());
    }

    #[test]
    fn waypoints_round_trip() {
        let w = vec![(0, DVector::from_vec(vec![1.0, -0.5])), (3, DVector::from_vec(vec![0.25, 2.0]))];
        let mut buf = Vec::new();
        write_waypoints_csv(&w, &mut buf).unwrap();
        assert_eq!(read_waypoints_csv(buf.as_slice(), 2).unwrap(), w);
        assert!(read_waypoints_csv(buf.as_slice(), 3).is_err());
    }

    #[test]
    fn points_with_and_without_labels() {
        let (p, l) = read_points_csv("p1,p2\n1,2\n3.5,4\n".as_bytes()).unwrap();
        assert_eq!(p, vec![[1.0, 2.0], [3.5, 4.0]]);
        assert!(l.is_none());
        let (_, l) = read_points_csv("p1,p2,label\n1,2,0\n3,4,2\n".as_bytes()).unwrap();
        assert_eq!(l, Some(vec![0, 2]));
        assert!(read_points_csv("p1,p2\n1,x\n".as_bytes()).is_err());
    }

    #[test]
    fn svg_one_polyline_per_series() {
        let (g, t) = run(3);
        let svg = emit_svg(&t, &g, &Selection::all_states(&g)).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        let svg = emit_svg(&t, &g, &Selection::all_weights(&g)).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(matches!(
            emit_svg(&t, &g, &Selection::States(vec![])),
            Err(OutputError::EmptySelection)
        ));
    }

    #[test]
    fn single_sample_svg_is_valid() {
        let (g, mut t) = run(1);
        t.times.truncate(1);
        t.states.truncate(1);
        let svg = emit_svg(&t, &g, &Selection::States(vec![0])).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(!svg.contains("NaN"));
    }
}
