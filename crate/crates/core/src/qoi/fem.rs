//! Finite-element QoIs on trilinear hexahedral meshes.
//!
//! Element-local node `n = kx + 2·ky + 4·kz` sits at reference coordinate
//! `(2kx−1, 2ky−1, 2kz−1)`; Gauss points use the same ordering with
//! coordinates `±1/√3`. With that ordering the interpolation matrix is
//! `A₁ ⊗ A₁ ⊗ A₁`.

use super::integrands::Integrand;
use super::{check_vars, SliceFunctional};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tensor::DenseTensor;
use std::path::Path;
use std::sync::Arc;

/// Hexahedral mesh whose nodes map onto the spatial modes of a tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct HexMesh {
    coords: Vec<[f64; 3]>,
    elements: Vec<[usize; 8]>,
    tensor_index: Vec<[usize; 3]>,
}

impl HexMesh {
    pub fn new(
        coords: Vec<[f64; 3]>,
        elements: Vec<[usize; 8]>,
        tensor_index: Vec<[usize; 3]>,
    ) -> Result<Self> {
        if coords.len() != tensor_index.len() {
            return Err(Error::InvalidArgument(format!(
                "{} node coordinates but {} tensor indices",
                coords.len(),
                tensor_index.len()
            )));
        }
        for (e, el) in elements.iter().enumerate() {
            if let Some(&n) = el.iter().find(|&&n| n >= coords.len()) {
                return Err(Error::InvalidArgument(format!(
                    "element {e} references node {n}, mesh has {} nodes",
                    coords.len()
                )));
            }
        }
        let mut seen = std::collections::HashSet::with_capacity(tensor_index.len());
        for (n, ti) in tensor_index.iter().enumerate() {
            if !seen.insert(*ti) {
                return Err(Error::InvalidArgument(format!(
                    "node {n} repeats tensor index {ti:?}"
                )));
            }
        }
        Ok(Self {
            coords,
            elements,
            tensor_index,
        })
    }

    /// Uniform grid with `nodes[a]` nodes and spacing `spacing[a]` per axis.
    /// Node `(i, j, k)` sits at `(i·hx, j·hy, k·hz)` and maps to tensor index
    /// `(i, j, k)`.
    pub fn structured(nodes: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        if nodes.iter().any(|&n| n < 2) {
            return Err(Error::InvalidArgument(format!(
                "structured mesh needs at least 2 nodes per axis, got {nodes:?}"
            )));
        }
        let [nx, ny, nz] = nodes;
        let id = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);
        let mut coords = Vec::with_capacity(nx * ny * nz);
        let mut tensor_index = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    coords.push([i as f64 * spacing[0], j as f64 * spacing[1], k as f64 * spacing[2]]);
                    tensor_index.push([i, j, k]);
                }
            }
        }
        let mut elements = Vec::with_capacity((nx - 1) * (ny - 1) * (nz - 1));
        for k in 0..nz - 1 {
            for j in 0..ny - 1 {
                for i in 0..nx - 1 {
                    let mut el = [0; 8];
                    for (n, slot) in el.iter_mut().enumerate() {
                        *slot = id(i + (n & 1), j + ((n >> 1) & 1), k + ((n >> 2) & 1));
                    }
                    elements.push(el);
                }
            }
        }
        Self::new(coords, elements, tensor_index)
    }

    /// Parses the plain-text mesh format:
    ///
    /// ```text
    /// nodes N elems E
    /// x y z i1 i2 i3        (N lines)
    /// n0 n1 n2 n3 n4 n5 n6 n7   (E lines)
    /// ```
    ///
    /// Indices are zero-based. Blank lines and lines starting with `#` are
    /// skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Format("empty mesh file".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let (n_nodes, n_elems) = match h.as_slice() {
            ["nodes", n, "elems", e] => (parse_num::<usize>(n)?, parse_num::<usize>(e)?),
            _ => return Err(Error::Format(format!("bad mesh header '{header}'"))),
        };
        let mut coords = Vec::with_capacity(n_nodes);
        let mut tensor_index = Vec::with_capacity(n_nodes);
        for n in 0..n_nodes {
            let line = lines
                .next()
                .ok_or_else(|| Error::Format(format!("missing node line {n}")))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 6 {
                return Err(Error::Format(format!("node line {n} needs 6 fields: '{line}'")));
            }
            coords.push([parse_num(f[0])?, parse_num(f[1])?, parse_num(f[2])?]);
            tensor_index.push([parse_num(f[3])?, parse_num(f[4])?, parse_num(f[5])?]);
        }
        let mut elements = Vec::with_capacity(n_elems);
        for e in 0..n_elems {
            let line = lines
                .next()
                .ok_or_else(|| Error::Format(format!("missing element line {e}")))?;
            let f: Vec<usize> = line
                .split_whitespace()
                .map(parse_num)
                .collect::<Result<_>>()?;
            let el: [usize; 8] = f
                .try_into()
                .map_err(|_| Error::Format(format!("element line {e} needs 8 node indices")))?;
            elements.push(el);
        }
        if lines.next().is_some() {
            return Err(Error::Format("trailing content after elements".into()));
        }
        Self::new(coords, elements, tensor_index)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Serializes in the format accepted by [`HexMesh::parse`].
    pub fn to_text(&self) -> String {
        let mut s = format!("nodes {} elems {}\n", self.coords.len(), self.elements.len());
        for (c, t) in self.coords.iter().zip(&self.tensor_index) {
            s.push_str(&format!(
                "{:?} {:?} {:?} {} {} {}\n",
                c[0], c[1], c[2], t[0], t[1], t[2]
            ));
        }
        for el in &self.elements {
            let v: Vec<String> = el.iter().map(usize::to_string).collect();
            s.push_str(&v.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn num_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn coords(&self) -> &[[f64; 3]] {
        &self.coords
    }

    pub fn elements(&self) -> &[[usize; 8]] {
        &self.elements
    }

    pub fn tensor_index(&self) -> &[[usize; 3]] {
        &self.tensor_index
    }

    /// Checks every node's tensor index against the tensor's spatial dims.
    pub fn check_spatial_dims(&self, spatial: &[usize]) -> Result<()> {
        if spatial.len() != 3 {
            return Err(Error::DimensionMismatch(format!(
                "hexahedral QoIs need 3 spatial modes, tensor has {}",
                spatial.len()
            )));
        }
        for (n, ti) in self.tensor_index.iter().enumerate() {
            if ti.iter().zip(spatial).any(|(&i, &d)| i >= d) {
                return Err(Error::DimensionMismatch(format!(
                    "node {n} maps to {ti:?}, outside spatial dims {spatial:?}"
                )));
            }
        }
        Ok(())
    }
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Format(format!("cannot parse '{s}' as a number")))
}

/// Interpolation matrix, weights and points of an element quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    interp: Matrix,
    weights: Vec<f64>,
    points: Vec<[f64; 3]>,
}

impl QuadratureRule {
    /// Trilinear basis with 2×2×2 Gauss points; `A = A₁ ⊗ A₁ ⊗ A₁`, unit weights.
    pub fn trilinear() -> Self {
        let g = 1.0 / 3f64.sqrt();
        let a1 = Matrix::from_rows(&[&[0.5 * (1.0 + g), 0.5 * (1.0 - g)], &[0.5 * (1.0 - g), 0.5 * (1.0 + g)]])
            .expect("2x2");
        let bit = |v: usize, axis: usize| (v >> axis) & 1;
        let interp = Matrix::from_fn(8, 8, |q, n| {
            (0..3).map(|axis| a1[(bit(q, axis), bit(n, axis))]).product()
        });
        let points = (0..8)
            .map(|q| {
                let s = |axis| if bit(q, axis) == 0 { -g } else { g };
                [s(0), s(1), s(2)]
            })
            .collect();
        Self {
            interp,
            weights: vec![1.0; 8],
            points,
        }
    }

    /// The 1-D factor `A₁`.
    pub fn trilinear_1d() -> Matrix {
        let g = 1.0 / 3f64.sqrt();
        Matrix::from_rows(&[&[0.5 * (1.0 + g), 0.5 * (1.0 - g)], &[0.5 * (1.0 - g), 0.5 * (1.0 + g)]])
            .expect("2x2")
    }

    pub fn interpolation(&self) -> &Matrix {
        &self.interp
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    /// Determinant of the reference-to-physical Jacobian at each quadrature
    /// point of the trilinear element with the given nodal coordinates.
    pub fn det_jac(&self, nodes: &[[f64; 3]; 8]) -> Vec<f64> {
        self.points
            .iter()
            .map(|xi| {
                let mut jac = [[0.0; 3]; 3];
                for (n, x) in nodes.iter().enumerate() {
                    let s = |axis: usize| if (n >> axis) & 1 == 0 { -1.0 } else { 1.0 };
                    let sh = |axis: usize| 0.5 * (1.0 + s(axis) * xi[axis]);
                    let dn = [
                        0.5 * s(0) * sh(1) * sh(2),
                        0.5 * s(1) * sh(0) * sh(2),
                        0.5 * s(2) * sh(0) * sh(1),
                    ];
                    for i in 0..3 {
                        for a in 0..3 {
                            jac[i][a] += x[i] * dn[a];
                        }
                    }
                }
                jac[0][0] * (jac[1][1] * jac[2][2] - jac[1][2] * jac[2][1])
                    - jac[0][1] * (jac[1][0] * jac[2][2] - jac[1][2] * jac[2][0])
                    + jac[0][2] * (jac[1][0] * jac[2][1] - jac[1][1] * jac[2][0])
            })
            .collect()
    }
}

/// Finite-element QoI values and derivative tensor.
///
/// `x` has dims `(I₁, I₂, I₃, variables, time)`. For each element the nodal
/// values of `vars` at `times` are gathered, interpolated to the quadrature
/// points, and the integrand and its gradient are accumulated into `g` (one
/// entry per requested time) and into `Z`. `Z` has the dims of `x` and is
/// zero outside `(vars, times)`.
pub fn fe_qoi_eval(
    x: &DenseTensor,
    integrand: &dyn Integrand,
    mesh: &HexMesh,
    rule: &QuadratureRule,
    vars: &[usize],
    times: &[usize],
) -> Result<(Vec<f64>, DenseTensor)> {
    let dims = x.dims();
    if dims.len() != 5 {
        return Err(Error::DimensionMismatch(format!(
            "finite-element QoIs need a 5-way tensor (3 spatial, variable, time), got {dims:?}"
        )));
    }
    if vars.len() != integrand.arity() {
        return Err(Error::InvalidArgument(format!(
            "integrand reads {} variables, {} selected",
            integrand.arity(),
            vars.len()
        )));
    }
    mesh.check_spatial_dims(&dims[..3])?;
    check_vars(vars, dims[3])?;
    if let Some(&t) = times.iter().find(|&&t| t >= dims[4]) {
        return Err(Error::IndexOutOfRange { index: t, size: dims[4] });
    }

    let a = rule.interpolation();
    let (nqp, nn) = (a.rows(), a.cols());
    let (nv, nt) = (vars.len(), times.len());
    let xs = x.as_slice();
    let mut g = vec![0.0; nt];
    let mut z = DenseTensor::zeros(dims)?;

    // Strides of the (variable, time) modes.
    let spatial = dims[0] * dims[1] * dims[2];
    let var_stride = spatial;
    let time_stride = spatial * dims[3];
    let node_offset = |ti: &[usize; 3]| ti[0] + dims[0] * (ti[1] + dims[1] * ti[2]);

    let mut u = vec![0.0; nn * nv * nt];
    let mut v = vec![0.0; nqp * nv * nt];
    let mut point = vec![0.0; nv];
    let mut grad = vec![0.0; nv];
    let mut dvals = vec![0.0; nqp * nv * nt];

    for (e, el) in mesh.elements().iter().enumerate() {
        let mut corner = [[0.0; 3]; 8];
        for (k, &n) in el.iter().enumerate() {
            corner[k] = mesh.coords()[n];
        }
        let b = rule.det_jac(&corner);
        if let Some(bad) = b.iter().position(|&d| !(d > 0.0)) {
            return Err(Error::Numeric(format!(
                "element {e} has non-positive Jacobian determinant {} at quadrature point {bad}",
                b[bad]
            )));
        }
        let offsets: Vec<usize> = el.iter().map(|&n| node_offset(&mesh.tensor_index()[n])).collect();

        // U(k, v, t): gather.
        for (ti, &t) in times.iter().enumerate() {
            for (vi, &var) in vars.iter().enumerate() {
                for (k, &off) in offsets.iter().enumerate() {
                    u[k + nn * (vi + nv * ti)] = xs[off + var * var_stride + t * time_stride];
                }
            }
        }
        // V₍₁₎ = A U₍₁₎.
        v.fill(0.0);
        for col in 0..nv * nt {
            for k in 0..nn {
                let uk = u[k + nn * col];
                for q in 0..nqp {
                    v[q + nqp * col] += a[(q, k)] * uk;
                }
            }
        }
        // F and D at the quadrature points; accumulate g.
        for ti in 0..nt {
            for q in 0..nqp {
                for vi in 0..nv {
                    point[vi] = v[q + nqp * (vi + nv * ti)];
                }
                let f = integrand.eval(&point)?;
                integrand.grad(&point, &mut grad)?;
                g[ti] += rule.weights()[q] * b[q] * f;
                for vi in 0..nv {
                    dvals[q + nqp * (vi + nv * ti)] = grad[vi];
                }
            }
        }
        // Z(i(k), v, t) += Σ_l w(l) b(l) a(l, k) D(l, v, t).
        let zs = z.as_mut_slice();
        for (k, &off) in offsets.iter().enumerate() {
            for ti in 0..nt {
                for vi in 0..nv {
                    let mut acc = 0.0;
                    for l in 0..nqp {
                        acc += rule.weights()[l] * b[l] * a[(l, k)] * dvals[l + nqp * (vi + nv * ti)];
                    }
                    zs[off + vars[vi] * var_stride + times[ti] * time_stride] += acc;
                }
            }
        }
    }
    Ok((g, z))
}

/// A finite-element integral QoI evaluated slice by slice.
#[derive(Debug, Clone)]
pub struct FeQoi {
    mesh: Arc<HexMesh>,
    rule: QuadratureRule,
    integrand: Arc<dyn Integrand>,
    vars: Vec<usize>,
}

impl FeQoi {
    pub fn new(mesh: Arc<HexMesh>, integrand: Arc<dyn Integrand>, vars: Vec<usize>) -> Result<Self> {
        if vars.len() != integrand.arity() {
            return Err(Error::InvalidArgument(format!(
                "integrand reads {} variables, {} selected",
                integrand.arity(),
                vars.len()
            )));
        }
        Ok(Self {
            mesh,
            rule: QuadratureRule::trilinear(),
            integrand,
            vars,
        })
    }

    fn as_single_step(slice: &DenseTensor) -> Result<DenseTensor> {
        let mut dims = slice.dims().to_vec();
        dims.push(1);
        DenseTensor::from_vec(&dims, slice.as_slice().to_vec())
    }
}

impl SliceFunctional for FeQoi {
    fn value(&self, slice: &DenseTensor) -> Result<f64> {
        let x = Self::as_single_step(slice)?;
        let (g, _) = fe_qoi_eval(&x, self.integrand.as_ref(), &self.mesh, &self.rule, &self.vars, &[0])?;
        Ok(g[0])
    }

    fn derivative(&self, slice: &DenseTensor) -> Result<DenseTensor> {
        let x = Self::as_single_step(slice)?;
        let (_, z) = fe_qoi_eval(&x, self.integrand.as_ref(), &self.mesh, &self.rule, &self.vars, &[0])?;
        DenseTensor::from_vec(slice.dims(), z.into_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qoi::InternalEnergy;

    #[test]
    fn one_d_factor_entries() {
        let a1 = QuadratureRule::trilinear_1d();
        let s = 1.0 / 3f64.sqrt();
        assert_eq!(a1[(0, 0)], (1.0 + s) / 2.0);
        assert_eq!(a1[(0, 1)], (1.0 - s) / 2.0);
        assert!((a1[(0, 0)] - 0.788675134594813).abs() < 1e-15);
        assert!((a1[(0, 1)] - 0.211324865405187).abs() < 1e-15);
    }

    #[test]
    fn rows_are_partition_of_unity() {
        let r = QuadratureRule::trilinear();
        for q in 0..8 {
            let s: f64 = (0..8).map(|n| r.interpolation()[(q, n)]).sum();
            assert!((s - 1.0).abs() <= 1e-14);
        }
        assert_eq!(r.weights(), &[1.0; 8]);
    }

    #[test]
    fn interpolation_reproduces_linear_fields() {
        // Oracle: evaluate the field analytically at the Gauss points.
        let r = QuadratureRule::trilinear();
        let field = |p: [f64; 3]| 0.3 + 1.7 * p[0] - 2.1 * p[1] + 0.4 * p[2];
        let nodal: Vec<f64> = (0..8)
            .map(|n| {
                let c = |a: usize| if (n >> a) & 1 == 0 { -1.0 } else { 1.0 };
                field([c(0), c(1), c(2)])
            })
            .collect();
        for (q, p) in r.points().iter().enumerate() {
            let interp: f64 = (0..8).map(|n| r.interpolation()[(q, n)] * nodal[n]).sum();
            assert!((interp - field(*p)).abs() <= 1e-13);
        }
    }

    #[test]
    fn uniform_det_jac() {
        let r = QuadratureRule::trilinear();
        let (hx, hy, hz) = (0.5, 0.25, 2.0);
        let mut nodes = [[0.0; 3]; 8];
        for (n, x) in nodes.iter_mut().enumerate() {
            *x = [hx * (n & 1) as f64, hy * ((n >> 1) & 1) as f64, hz * ((n >> 2) & 1) as f64];
        }
        for d in r.det_jac(&nodes) {
            assert!((d - hx * hy * hz / 8.0).abs() < 1e-15);
        }
    }

    #[test]
    fn mesh_validation() {
        assert!(HexMesh::new(vec![[0.0; 3]], vec![[0, 0, 0, 0, 0, 0, 0, 1]], vec![[0, 0, 0]]).is_err());
        assert!(HexMesh::new(vec![[0.0; 3]; 2], vec![], vec![[0, 0, 0]; 2]).is_err());
        assert!(HexMesh::structured([1, 2, 2], [1.0; 3]).is_err());
    }

    #[test]
    fn mesh_text_round_trip() {
        let m = HexMesh::structured([3, 2, 2], [0.5, 1.0, 0.25]).unwrap();
        let parsed = HexMesh::parse(&m.to_text()).unwrap();
        assert_eq!(parsed, m);
        assert!(HexMesh::parse("nodes 1 elems 0\n0 0 0 0 0\n").is_err());
        assert!(HexMesh::parse("vertices 1\n").is_err());
    }

    #[test]
    fn inverted_element_is_named() {
        let mut m = HexMesh::structured([2, 2, 2], [1.0; 3]).unwrap();
        m.elements[0].swap(0, 1);
        let x = DenseTensor::from_fn(&[2, 2, 2, 1, 1], |_| 1.0).unwrap();
        let err = fe_qoi_eval(&x, &crate::qoi::InternalEnergy, &m, &QuadratureRule::trilinear(), &[0], &[0])
            .unwrap_err();
        assert!(err.to_string().contains("element 0"), "{err}");
    }

    #[derive(Debug)]
    struct One;

    impl Integrand for One {
        fn arity(&self) -> usize {
            1
        }
        fn eval(&self, _u: &[f64]) -> Result<f64> {
            Ok(1.0)
        }
        fn grad(&self, _u: &[f64], out: &mut [f64]) -> Result<()> {
            out[0] = 0.0;
            Ok(())
        }
    }

    fn unit_cube(n: usize) -> HexMesh {
        let h = 1.0 / (n - 1) as f64;
        HexMesh::structured([n; 3], [h; 3]).unwrap()
    }

    #[test]
    fn unit_cube_volume() {
        let mesh = unit_cube(4);
        let x = DenseTensor::from_fn(&[4, 4, 4, 1, 2], |_| 0.3).unwrap();
        let (g, z) = fe_qoi_eval(&x, &One, &mesh, &QuadratureRule::trilinear(), &[0], &[0, 1]).unwrap();
        for v in g {
            assert!((v - 1.0).abs() <= 1e-12, "{v}");
        }
        assert!(z.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_linear_field() {
        let mesh = HexMesh::structured([3, 4, 5], [0.5, 0.25, 0.2]).unwrap();
        let vol = 1.0 * 0.75 * 0.8;
        let c = 2.5;
        let x = DenseTensor::from_fn(&[3, 4, 5, 2, 3], |i| if i[3] == 1 { c } else { -7.0 }).unwrap();
        let (g, z) = fe_qoi_eval(&x, &InternalEnergy, &mesh, &QuadratureRule::trilinear(), &[1], &[2]).unwrap();
        assert_eq!(g.len(), 1);
        assert!((g[0] - c * vol).abs() <= 1e-12);
        let total: f64 = z.as_slice().iter().sum();
        assert!((total - vol).abs() <= 1e-12);
        // Only (var 1, time 2) is populated.
        assert!(z.time_slice(0).unwrap().as_slice().iter().all(|&v| v == 0.0));
        let y = DenseTensor::from_fn(x.dims(), |i| (i[0] * i[1] + i[2]) as f64).unwrap();
        let (_, zy) = fe_qoi_eval(&y, &InternalEnergy, &mesh, &QuadratureRule::trilinear(), &[1], &[2]).unwrap();
        assert_eq!(z, zy);
    }

    fn smooth_field(dims: &[usize], h: f64) -> DenseTensor {
        DenseTensor::from_fn(dims, |i| {
            let (x, y, z) = (i[0] as f64 * h, i[1] as f64 * h, i[2] as f64 * h);
            let v = i[3] as f64;
            let t = i[4] as f64;
            if i[3] == 0 {
                1.5 + 0.3 * (x + 2.0 * y).sin() * (z + t).cos()
            } else {
                (v * x + y * z).cos() + 0.2 * (t + v) - z * z
            }
        })
        .unwrap()
    }

    fn integrands() -> Vec<(Box<dyn Integrand>, Vec<usize>)> {
        vec![
            (Box::new(InternalEnergy), vec![1]),
            (Box::new(crate::qoi::KineticEnergyDensity { components: 3 }), vec![0, 1, 2, 3]),
            (Box::new(crate::qoi::MagneticEnergy { components: 2, mu0: 1.3 }), vec![2, 3]),
            (Box::new(crate::qoi::MomentumSquared { components: 3 }), vec![1, 2, 3]),
        ]
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mesh = unit_cube(3);
        let rule = QuadratureRule::trilinear();
        let x = smooth_field(&[3, 3, 3, 4, 2], 0.5);
        for (f, vars) in integrands() {
            let (_, z) = fe_qoi_eval(&x, f.as_ref(), &mesh, &rule, &vars, &[1]).unwrap();
            for k in 0..x.len() {
                let step = 1e-6 * x.as_slice()[k].abs().max(1.0);
                let mut p = x.clone();
                p.as_mut_slice()[k] += step;
                let mut m = x.clone();
                m.as_mut_slice()[k] -= step;
                let gp = fe_qoi_eval(&p, f.as_ref(), &mesh, &rule, &vars, &[1]).unwrap().0[0];
                let gm = fe_qoi_eval(&m, f.as_ref(), &mesh, &rule, &vars, &[1]).unwrap().0[0];
                let fd = (gp - gm) / (2.0 * step);
                let exact = z.as_slice()[k];
                assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1e-3), "{f:?} entry {k}: {fd} vs {exact}");
            }
        }
    }

    /// Trapezoidal sum of the integrand at the nodes of a uniform grid.
    fn nodal_oracle(x: &DenseTensor, f: &dyn Integrand, vars: &[usize], n: usize, h: f64) -> f64 {
        let mut s = 0.0;
        let w = |i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let u: Vec<f64> = vars.iter().map(|&v| x.get(&[i, j, k, v, 0])).collect();
                    s += w(i) * w(j) * w(k) * f.eval(&u).unwrap();
                }
            }
        }
        s * h * h * h
    }

    #[test]
    fn second_order_agreement_with_nodal_sum() {
        let rule = QuadratureRule::trilinear();
        for (f, vars) in integrands() {
            let mut diffs = Vec::new();
            for n in [5, 9, 17] {
                let h = 1.0 / (n - 1) as f64;
                let x = smooth_field(&[n, n, n, 4, 1], h);
                let mesh = unit_cube(n);
                let g = fe_qoi_eval(&x, f.as_ref(), &mesh, &rule, &vars, &[0]).unwrap().0[0];
                diffs.push((g - nodal_oracle(&x, f.as_ref(), &vars, n, h)).abs());
            }
            // Both rules are second order, so halving h shrinks the gap about 4x.
            // Linear integrands are integrated exactly by both and only differ by roundoff.
            for w in diffs.windows(2) {
                assert!(w[1] < w[0] / 3.0 || w[1] < 1e-13, "{f:?}: {diffs:?}");
            }
        }
    }

    #[test]
    fn zero_density_is_an_error() {
        let mesh = unit_cube(2);
        let x = DenseTensor::from_fn(&[2, 2, 2, 2, 1], |i| if i[3] == 0 { 0.0 } else { 1.0 }).unwrap();
        let ke = crate::qoi::KineticEnergyDensity { components: 1 };
        let err = fe_qoi_eval(&x, &ke, &mesh, &QuadratureRule::trilinear(), &[0, 1], &[0]).unwrap_err();
        assert!(err.is_numeric());
    }

    #[test]
    fn slice_functional_matches_direct_evaluation() {
        let mesh = Arc::new(unit_cube(3));
        let x = smooth_field(&[3, 3, 3, 4, 2], 0.5);
        let ke: Arc<dyn Integrand> = Arc::new(crate::qoi::KineticEnergyDensity { components: 2 });
        let q = FeQoi::new(mesh.clone(), ke.clone(), vec![0, 2, 3]).unwrap();
        let (g, z) = fe_qoi_eval(&x, ke.as_ref(), &mesh, &QuadratureRule::trilinear(), &[0, 2, 3], &[1]).unwrap();
        let slice = x.time_slice(1).unwrap();
        assert_eq!(q.value(&slice).unwrap(), g[0]);
        assert_eq!(q.derivative(&slice).unwrap().as_slice(), z.time_slice(1).unwrap().as_slice());
        assert!(FeQoi::new(mesh, ke, vec![0]).is_err());
    }
}
