//! Grid-sum QoIs for uniformly spaced data (the cell volume factor is dropped).

use super::{check_vars, slice_layout, SliceFunctional};
use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// `coefficient · Σ_space Σ_{v∈vars} X[·, v]`, e.g. total mass when the
/// variables are per-species partial densities.
#[derive(Debug, Clone)]
pub struct VariableSum {
    vars: Vec<usize>,
    coefficient: f64,
}

impl VariableSum {
    pub fn new(vars: Vec<usize>, coefficient: f64) -> Result<Self> {
        if vars.is_empty() {
            return Err(Error::InvalidArgument("variable sum needs at least one variable".into()));
        }
        Ok(Self { vars, coefficient })
    }
}

impl SliceFunctional for VariableSum {
    fn value(&self, slice: &DenseTensor) -> Result<f64> {
        let (ns, nv) = slice_layout(slice);
        check_vars(&self.vars, nv)?;
        let data = slice.as_slice();
        let s: f64 = self
            .vars
            .iter()
            .map(|&v| data[v * ns..(v + 1) * ns].iter().sum::<f64>())
            .sum();
        Ok(self.coefficient * s)
    }

    fn derivative(&self, slice: &DenseTensor) -> Result<DenseTensor> {
        let (ns, nv) = slice_layout(slice);
        check_vars(&self.vars, nv)?;
        let mut z = DenseTensor::zeros(slice.dims())?;
        for &v in &self.vars {
            z.as_mut_slice()[v * ns..(v + 1) * ns]
                .iter_mut()
                .for_each(|e| *e += self.coefficient);
        }
        Ok(z)
    }

    fn is_linear(&self) -> bool {
        true
    }
}

/// `Σ_space D·(Uₓ² + U_y²)` with `D = Σ_{v∈density_vars} X[·, v]`.
#[derive(Debug, Clone)]
pub struct KineticEnergy {
    density_vars: Vec<usize>,
    ux: usize,
    uy: usize,
}

impl KineticEnergy {
    pub fn new(density_vars: Vec<usize>, ux: usize, uy: usize) -> Result<Self> {
        if density_vars.is_empty() {
            return Err(Error::InvalidArgument("kinetic energy needs density variables".into()));
        }
        if density_vars.contains(&ux) || density_vars.contains(&uy) {
            return Err(Error::InvalidArgument(
                "velocity variable overlaps the density variables".into(),
            ));
        }
        Ok(Self { density_vars, ux, uy })
    }

    fn check(&self, nv: usize) -> Result<()> {
        check_vars(&self.density_vars, nv)?;
        check_vars(&[self.ux, self.uy], nv)
    }
}

impl SliceFunctional for KineticEnergy {
    fn value(&self, slice: &DenseTensor) -> Result<f64> {
        let (ns, nv) = slice_layout(slice);
        self.check(nv)?;
        let data = slice.as_slice();
        let mut g = 0.0;
        for s in 0..ns {
            let d: f64 = self.density_vars.iter().map(|&v| data[v * ns + s]).sum();
            let (u, w) = (data[self.ux * ns + s], data[self.uy * ns + s]);
            g += d * (u * u + w * w);
        }
        Ok(g)
    }

    fn derivative(&self, slice: &DenseTensor) -> Result<DenseTensor> {
        let (ns, nv) = slice_layout(slice);
        self.check(nv)?;
        let data = slice.as_slice();
        let mut z = DenseTensor::zeros(slice.dims())?;
        let out = z.as_mut_slice();
        for s in 0..ns {
            let d: f64 = self.density_vars.iter().map(|&v| data[v * ns + s]).sum();
            let (u, w) = (data[self.ux * ns + s], data[self.uy * ns + s]);
            for &v in &self.density_vars {
                out[v * ns + s] += u * u + w * w;
            }
            out[self.ux * ns + s] += 2.0 * d * u;
            out[self.uy * ns + s] += 2.0 * d * w;
        }
        Ok(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo_random(dims: &[usize], seed: u64) -> DenseTensor {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        DenseTensor::from_fn(dims, |_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .unwrap()
    }

    #[test]
    fn all_ones_count() {
        let x = DenseTensor::from_fn(&[2, 2, 28, 3], |_| 1.0).unwrap();
        let q = VariableSum::new((0..28).collect(), 1.0).unwrap();
        for t in 0..3 {
            assert_eq!(q.value(&x.time_slice(t).unwrap()).unwrap(), 112.0);
        }
        let z = DenseTensor::zeros(&[2, 2, 28]).unwrap();
        assert_eq!(q.value(&z).unwrap(), 0.0);
        assert!(VariableSum::new(vec![], 1.0).is_err());
        assert!(VariableSum::new(vec![28], 1.0).unwrap().value(&z).is_err());
    }

    #[test]
    fn variable_sum_matches_loop() {
        let x = pseudo_random(&[3, 4, 5], 7);
        let vars = vec![1, 3];
        let q = VariableSum::new(vars.clone(), 2.5).unwrap();
        let mut expect = 0.0;
        for i in 0..3 {
            for j in 0..4 {
                for &v in &vars {
                    expect += x.get(&[i, j, v]);
                }
            }
        }
        assert_eq!(q.value(&x).unwrap(), 2.5 * expect);
        let z = q.derivative(&x).unwrap();
        assert_eq!(z.get(&[2, 1, 3]), 2.5);
        assert_eq!(z.get(&[2, 1, 2]), 0.0);
    }

    #[test]
    fn single_cell_kinetic_energy() {
        // D = 2, Uₓ = 3, U_y = 4 gives 2·(9 + 16).
        let x = DenseTensor::from_vec(&[1, 3], vec![2.0, 3.0, 4.0]).unwrap();
        let ke = KineticEnergy::new(vec![0], 1, 2).unwrap();
        assert_eq!(ke.value(&x).unwrap(), 50.0);
        assert!(KineticEnergy::new(vec![0, 1], 1, 2).is_err());
    }

    #[test]
    fn zero_velocity() {
        let mut x = pseudo_random(&[3, 3, 4], 1);
        for s in 0..9 {
            x.as_mut_slice()[2 * 9 + s] = 0.0;
            x.as_mut_slice()[3 * 9 + s] = 0.0;
        }
        let ke = KineticEnergy::new(vec![0, 1], 2, 3).unwrap();
        assert_eq!(ke.value(&x).unwrap(), 0.0);
        let z = ke.derivative(&x).unwrap();
        assert!(z.as_slice()[..18].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn kinetic_energy_derivative_matches_central_differences() {
        let ke = KineticEnergy::new(vec![0, 1], 2, 3).unwrap();
        for seed in 0..5 {
            let x = pseudo_random(&[3, 3, 4], seed);
            let z = ke.derivative(&x).unwrap();
            for k in 0..x.len() {
                let h = 1e-6;
                let mut p = x.clone();
                p.as_mut_slice()[k] += h;
                let mut m = x.clone();
                m.as_mut_slice()[k] -= h;
                let fd = (ke.value(&p).unwrap() - ke.value(&m).unwrap()) / (2.0 * h);
                let exact = z.as_slice()[k];
                assert!((fd - exact).abs() <= 1e-7 * exact.abs().max(1.0), "{fd} vs {exact}");
            }
        }
    }
}
