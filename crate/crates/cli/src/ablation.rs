//! Variant grids for the ablation command.

use crate::args::Grid;

#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    /// Unique name, also the run subdirectory.
    pub label: String,
    /// Leading CSV cells describing the variant.
    pub cells: Vec<String>,
    /// Configuration overrides applied on top of the base config.
    pub overrides: Vec<(&'static str, String)>,
}

pub struct GridSpec {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub variants: Vec<Variant>,
}

fn variant(label: String, cells: Vec<String>, overrides: Vec<(&'static str, String)>) -> Variant {
    Variant { label, cells, overrides }
}

pub const FIG4_TAUS: [f64; 4] = [1e-2, 1e-1, 1.0, 10.0];
pub const FIG4_LAMBDAS: [f64; 5] = [1e-2, 1e-1, 1.0, 10.0, 100.0];

pub fn grid_spec(grid: Grid) -> GridSpec {
    match grid {
        Grid::Table3 => {
            let modes = [("per_both", "BusGCL_per"), ("hyp_both", "BusGCL_hyp"), ("reversed", "BusGCL_rev"), ("busgcl", "BusGCL")];
            let mut variants = Vec::new();
            for (mode, name) in modes {
                for (disp, mark) in [("none", "no"), ("dispersing", "yes")] {
                    let suffix = if disp == "none" { "nodisp" } else { "disp" };
                    variants.push(variant(
                        format!("{}_{suffix}", name.to_lowercase()),
                        vec![name.into(), mark.into()],
                        vec![("subview_mode", mode.into()), ("disp_mode", disp.into())],
                    ));
                }
            }
            GridSpec { name: "table3", columns: vec!["variant", "disp"], variants }
        }
        Grid::Table4 => {
            let pairs = [
                ("hypergraph", "perturb"),
                ("hypergraph", "node_drop"),
                ("hypergraph", "edge_drop"),
                ("hypergraph", "random_walk"),
                ("node_drop", "perturb"),
                ("edge_drop", "perturb"),
                ("random_walk", "perturb"),
            ];
            let variants = pairs
                .iter()
                .map(|(u, i)| {
                    variant(
                        format!("{u}-{i}"),
                        vec![(*u).into(), (*i).into()],
                        vec![("user_view", (*u).into()), ("item_view", (*i).into())],
                    )
                })
                .collect();
            GridSpec { name: "table4", columns: vec!["user_model", "item_model"], variants }
        }
        Grid::Table5 => {
            let variants = ["dispersing", "kl", "none"]
                .iter()
                .map(|m| variant((*m).into(), vec![(*m).into()], vec![("disp_mode", (*m).into())]))
                .collect();
            GridSpec { name: "table5", columns: vec!["loss"], variants }
        }
        Grid::Layers => {
            let variants = (1..=5)
                .map(|l: usize| variant(format!("layers_{l}"), vec![l.to_string()], vec![("layers", l.to_string())]))
                .collect();
            GridSpec { name: "layers", columns: vec!["layers"], variants }
        }
        Grid::Fig4 => {
            let mut variants = Vec::new();
            for tau in FIG4_TAUS {
                for lambda in FIG4_LAMBDAS {
                    variants.push(variant(
                        format!("tau_d_{tau}-lambda_d_{lambda}"),
                        vec![tau.to_string(), lambda.to_string()],
                        vec![("tau_d", tau.to_string()), ("lambda_d", lambda.to_string()), ("disp_mode", "dispersing".into())],
                    ));
                }
            }
            GridSpec { name: "fig4", columns: vec!["tau_d", "lambda_d"], variants }
        }
    }
}
