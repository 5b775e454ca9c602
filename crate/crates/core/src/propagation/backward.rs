use ndarray::Array2;

/// Lazily allocated gradient accumulators for one side of a stack: one slot
/// per layer output (`1..=L`) and per readout (`0..=L`).
#[derive(Debug, Clone)]
pub(crate) struct SideGrads {
    rows: usize,
    dim: usize,
    layers: Vec<Option<Array2<f64>>>,
    readouts: Vec<Option<Array2<f64>>>,
}

fn accumulate(slot: &mut Option<Array2<f64>>, g: &Array2<f64>) {
    match slot {
        Some(acc) => *acc += g,
        None => *slot = Some(g.clone()),
    }
}

impl SideGrads {
    pub fn new(rows: usize, dim: usize, layers: usize) -> Self {
        Self { rows, dim, layers: vec![None; layers], readouts: vec![None; layers + 1] }
    }

    /// Gradient on the output of layer `l` (1-based).
    pub fn add_layer(&mut self, l: usize, g: &Array2<f64>) {
        accumulate(&mut self.layers[l - 1], g);
    }

    pub fn add_readout(&mut self, l: usize, g: &Array2<f64>) {
        accumulate(&mut self.readouts[l], g);
    }

    pub fn layer_mut(&mut self, l: usize) -> &mut Array2<f64> {
        let (rows, dim) = (self.rows, self.dim);
        self.layers[l - 1].get_or_insert_with(|| Array2::zeros((rows, dim)))
    }

    pub fn readout_mut(&mut self, l: usize) -> &mut Array2<f64> {
        let (rows, dim) = (self.rows, self.dim);
        self.readouts[l].get_or_insert_with(|| Array2::zeros((rows, dim)))
    }

    pub fn take_layer(&mut self, l: usize) -> Option<Array2<f64>> {
        self.layers[l - 1].take()
    }

    pub fn take_readout(&mut self, l: usize) -> Option<Array2<f64>> {
        self.readouts[l].take()
    }

    /// Total gradient reaching the output of layer `l`: its direct gradient
    /// plus the readout gradient, since readout `l` adds the output linearly.
    pub fn take_total(&mut self, l: usize) -> Option<Array2<f64>> {
        let direct = self.take_layer(l);
        match (direct, self.readouts[l].as_ref()) {
            (Some(mut d), Some(r)) => {
                d += r;
                Some(d)
            }
            (Some(d), None) => Some(d),
            (None, Some(r)) => Some(r.clone()),
            (None, None) => None,
        }
    }

    pub fn into_base(mut self) -> Array2<f64> {
        let (rows, dim) = (self.rows, self.dim);
        self.readouts[0].take().unwrap_or_else(|| Array2::zeros((rows, dim)))
    }
}
