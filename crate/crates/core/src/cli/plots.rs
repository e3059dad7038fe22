//! Static SVG figures: rasters, response traces and loss curves.

use std::path::{Path, PathBuf};

use log::warn;
use plotters::prelude::*;

use crate::engine::loss::LossBreakdown;
use crate::error::{Error, Result};
use crate::spikes::SpikeMatrix;

const SIZE: (u32, u32) = (1000, 500);

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn save(path: &Path, svg: String) -> Result<PathBuf> {
    std::fs::write(path, svg)?;
    Ok(path.to_path_buf())
}

pub fn raster_svg(x: &SpikeMatrix, title: &str) -> Result<String> {
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 18))
            .margin(10)
            .x_label_area_size(35)
            .y_label_area_size(50)
            .build_cartesian_2d(0..x.n_bins().max(1), 0..x.n_neurons().max(1))
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .disable_mesh()
            .x_desc("time bin")
            .y_desc("neuron")
            .draw()
            .map_err(plot_err)?;
        chart
            .draw_series(x.iter().map(|(n, t)| Pixel::new((t, n), BLACK)))
            .map_err(plot_err)?;
    }
    Ok(svg)
}

pub fn trace_svg(trace: &[f64], alpha: Option<f64>, title: &str) -> Result<String> {
    let mut svg = String::new();
    {
        let top = trace
            .iter()
            .copied()
            .chain(alpha)
            .fold(0.0f64, f64::max)
            .max(1e-12)
            * 1.05;
        let root = SVGBackend::with_string(&mut svg, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 18))
            .margin(10)
            .x_label_area_size(35)
            .y_label_area_size(60)
            .build_cartesian_2d(0..trace.len().max(1), 0.0..top)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .disable_mesh()
            .x_desc("time bin")
            .y_desc("response")
            .draw()
            .map_err(plot_err)?;
        chart
            .draw_series(LineSeries::new(trace.iter().copied().enumerate(), &BLUE))
            .map_err(plot_err)?;
        if let Some(a) = alpha {
            chart
                .draw_series(LineSeries::new(
                    [(0, a), (trace.len(), a)],
                    RED.stroke_width(1),
                ))
                .map_err(plot_err)?;
        }
    }
    Ok(svg)
}

pub fn loss_svg(history: &[LossBreakdown]) -> Result<String> {
    let mut svg = String::new();
    {
        let total: Vec<f64> = history.iter().map(|l| l.total).collect();
        let (lo, hi) = total
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) };
        let pad = ((hi - lo) * 0.05).max(1e-9);
        let root = SVGBackend::with_string(&mut svg, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption("loss", ("sans-serif", 18))
            .margin(10)
            .x_label_area_size(35)
            .y_label_area_size(70)
            .build_cartesian_2d(1..history.len().max(2), (lo - pad)..(hi + pad))
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .disable_mesh()
            .x_desc("step")
            .y_desc("loss")
            .draw()
            .map_err(plot_err)?;
        chart
            .draw_series(LineSeries::new(
                total.iter().enumerate().map(|(i, &v)| (i + 1, v)),
                &BLACK,
            ))
            .map_err(plot_err)?;
    }
    Ok(svg)
}

/// Inputs for [`emit_plots`].
pub struct PlotInputs<'a> {
    pub raster: &'a SpikeMatrix,
    /// Raster with rows reordered by the first filter.
    pub sorted: Option<&'a SpikeMatrix>,
    pub traces: &'a [Vec<f64>],
    pub alpha: Option<f64>,
    pub loss_history: &'a [LossBreakdown],
}

/// Write every figure into `out_dir` and return the paths.
pub fn emit_plots(inputs: &PlotInputs, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = vec![save(&out_dir.join("raster.svg"), raster_svg(inputs.raster, "raster")?)?];
    if let Some(sorted) = inputs.sorted {
        out.push(save(&out_dir.join("raster_sorted.svg"), raster_svg(sorted, "sorted raster")?)?);
    }
    if inputs.alpha.is_none() {
        warn!("no calibration supplied; trace plots have no threshold line");
    }
    for (k, tr) in inputs.traces.iter().enumerate() {
        let svg = trace_svg(tr, inputs.alpha, &format!("filter {k}"))?;
        out.push(save(&out_dir.join(format!("trace_{k}.svg")), svg)?);
    }
    if !inputs.loss_history.is_empty() {
        out.push(save(&out_dir.join("loss.svg"), loss_svg(inputs.loss_history)?)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_line_only_with_calibration() {
        let tr: Vec<f64> = (0..50).map(|i| (i as f64 / 7.0).sin().abs()).collect();
        let with = trace_svg(&tr, Some(0.8), "t").unwrap();
        let without = trace_svg(&tr, None, "t").unwrap();
        let red = "#FF0000";
        assert!(with.contains(red));
        assert!(!without.contains(red));
    }

    #[test]
    fn plots_are_byte_identical() {
        let x = SpikeMatrix::new(3, 20, [(0, 1), (2, 5), (1, 19)]).unwrap();
        assert_eq!(raster_svg(&x, "r").unwrap(), raster_svg(&x, "r").unwrap());
        let dir = tempfile::tempdir().unwrap();
        let tr = vec![vec![0.0, 1.0, 0.5]];
        let inputs = PlotInputs {
            raster: &x,
            sorted: Some(&x),
            traces: &tr,
            alpha: None,
            loss_history: &[],
        };
        let files = emit_plots(&inputs, dir.path()).unwrap();
        assert_eq!(files.len(), 3);
        let first: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(f).unwrap()).collect();
        emit_plots(&inputs, dir.path()).unwrap();
        let second: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(f).unwrap()).collect();
        assert_eq!(first, second);
    }
}
