use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use morse_forge::factors::{FactorId, FactorSpec};
use morse_forge::matching::{parse_signed_letter, BoundaryHomeo, GaugeTransfer};
use morse_forge::morse::Gauge;
use morse_forge::rational::{self, Q};
use morse_forge::words::FreeProduct;
use serde::{Deserialize, Serialize};

pub const SCHEMA: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FactorConfig {
    Line {
        #[serde(default)]
        names: Option<Vec<String>>,
    },
    Lattice {
        dim: usize,
        #[serde(default)]
        names: Option<Vec<String>>,
    },
    Free {
        rank: usize,
        #[serde(default)]
        names: Option<Vec<String>>,
    },
    Cyclic {
        n: u32,
        #[serde(default)]
        names: Option<Vec<String>>,
    },
    Table {
        mul: Vec<Vec<u32>>,
        gens: Vec<u32>,
        #[serde(default)]
        names: Option<Vec<String>>,
    },
}

impl FactorConfig {
    pub fn build(&self, id: FactorId) -> Result<FactorSpec> {
        let (spec, names) = match self {
            FactorConfig::Line { names } => (FactorSpec::integer_line(id), names),
            FactorConfig::Lattice { dim, names } => {
                if *dim == 0 {
                    bail!("lattice dimension must be positive");
                }
                (FactorSpec::lattice(id, *dim), names)
            }
            FactorConfig::Free { rank, names } => {
                if *rank == 0 {
                    bail!("free rank must be positive");
                }
                (FactorSpec::free_group(id, *rank), names)
            }
            FactorConfig::Cyclic { n, names } => (FactorSpec::cyclic(id, *n)?, names),
            FactorConfig::Table { mul, gens, names } => (FactorSpec::finite_table(id, mul.clone(), gens.clone())?, names),
        };
        Ok(match names {
            Some(n) => spec.with_names(n.clone())?,
            None => spec,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupConfig {
    pub a: FactorConfig,
    pub b: FactorConfig,
}

impl GroupConfig {
    pub fn build(&self) -> Result<FreeProduct> {
        Ok(FreeProduct::new(self.a.build(FactorId::A)?, self.b.build(FactorId::B)?)?)
    }

    pub fn integers() -> Self {
        GroupConfig { a: FactorConfig::Line { names: None }, b: FactorConfig::Line { names: None } }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum HomeoConfig {
    Identity,
    LineSwap,
    /// Images of the generators in order, e.g. `["y", "x^-1"]`.
    Permutation { images: Vec<String> },
}

impl HomeoConfig {
    pub fn build(&self, target: &FactorSpec, transfer: GaugeTransfer) -> Result<BoundaryHomeo> {
        let mut h = match self {
            HomeoConfig::Identity => BoundaryHomeo::identity(),
            HomeoConfig::LineSwap => BoundaryHomeo::line_swap(),
            HomeoConfig::Permutation { images } => {
                let letters = images.iter().map(|s| parse_signed_letter(target, s)).collect::<Result<Vec<_>, _>>()?;
                BoundaryHomeo::permutation(letters)?
            }
        };
        h.transfer = transfer;
        Ok(h)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HomeoPair {
    pub a: HomeoConfig,
    pub b: HomeoConfig,
}

impl Default for HomeoPair {
    fn default() -> Self {
        HomeoPair { a: HomeoConfig::Identity, b: HomeoConfig::Identity }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct Budgets {
    pub ball_radius: u32,
    pub ball_vertices: u64,
    pub path_cap: u64,
    pub path_maxlen: usize,
    pub ray_depth: usize,
    pub match_steps: usize,
    pub node_budget: u64,
    pub continuity_k: u64,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            ball_radius: 4,
            ball_vertices: 200_000,
            path_cap: 50_000_000,
            path_maxlen: 2,
            ray_depth: 4096,
            match_steps: 20,
            node_budget: 500_000_000,
            continuity_k: 12,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridPoint(#[serde(with = "rational")] pub Q, #[serde(with = "rational")] pub Q);

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct PopulationConfig {
    pub depth: usize,
    pub period: usize,
    pub centers: usize,
    pub members: usize,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        PopulationConfig { depth: 4, period: 2, centers: 200, members: 16 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub schema: u32,
    /// G_1, and optionally G_2 (defaults to G_1).
    pub groups: Vec<GroupConfig>,
    #[serde(default)]
    pub homeos: HomeoPair,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default = "default_grid")]
    pub grid: Vec<GridPoint>,
    /// (λ, ε) points for projection-qg and concat-qg.
    #[serde(default = "default_probes")]
    pub probes: Vec<GridPoint>,
    #[serde(default)]
    pub gauge: Option<Gauge>,
    #[serde(default)]
    pub transfer: Vec<(Gauge, Gauge)>,
    #[serde(default)]
    pub population: PopulationConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_seed() -> u64 {
    1
}

fn points(ps: &[(i64, i64)]) -> Vec<GridPoint> {
    ps.iter().map(|&(l, e)| GridPoint(Q::from_integer(l), Q::from_integer(e))).collect()
}

pub fn default_grid() -> Vec<GridPoint> {
    points(&[(1, 0), (1, 2), (2, 1), (3, 0), (5, 0)])
}

pub fn default_probes() -> Vec<GridPoint> {
    points(&[(1, 0), (1, 2), (2, 1), (3, 0)])
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema: SCHEMA,
            groups: vec![GroupConfig::integers()],
            homeos: HomeoPair::default(),
            budgets: Budgets::default(),
            grid: default_grid(),
            probes: default_probes(),
            gauge: None,
            transfer: Vec::new(),
            population: PopulationConfig::default(),
            seed: default_seed(),
            output: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            bail!("unsupported config schema {} (expected {SCHEMA})", self.schema);
        }
        if self.groups.is_empty() || self.groups.len() > 2 {
            bail!("`groups` lists one or two free products");
        }
        let b = &self.budgets;
        if b.ball_vertices == 0 || b.path_cap == 0 || b.ray_depth == 0 || b.node_budget == 0 || b.continuity_k == 0 {
            bail!("budgets must be positive");
        }
        let has = |l: i64, e: i64| self.grid.iter().any(|p| p.0 == Q::from_integer(l) && p.1 == Q::from_integer(e));
        if !has(5, 0) || !has(3, 0) {
            bail!("the grid must contain (5, 0) and (3, 0) so that δ can be evaluated");
        }
        if self.grid.iter().chain(&self.probes).any(|p| p.0 < Q::from_integer(1) || p.1 < Q::from_integer(0)) {
            bail!("grid points need λ ≥ 1 and ε ≥ 0");
        }
        Ok(())
    }

    pub fn source(&self) -> Result<FreeProduct> {
        self.groups[0].build()
    }

    pub fn target(&self) -> Result<FreeProduct> {
        self.groups.last().expect("validated").build()
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge.clone().unwrap_or_else(Gauge::tree)
    }

    pub fn grid(&self) -> Vec<(Q, Q)> {
        self.grid.iter().map(|p| (p.0, p.1)).collect()
    }

    pub fn homeos(&self, target: &FreeProduct) -> Result<[BoundaryHomeo; 2]> {
        let transfer = GaugeTransfer { entries: self.transfer.clone() };
        Ok([
            self.homeos.a.build(target.factor(FactorId::A), transfer.clone())?,
            self.homeos.b.build(target.factor(FactorId::B), transfer)?,
        ])
    }
}
