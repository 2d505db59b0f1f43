use crate::coefficients::VectorFieldSpec;
use crate::error::{Error, Result};

/// Heun discretisation of `ẋ = b(x) + σ(x) h_t` from one start point, with
/// `h` constant on `k` intervals of `substeps` steps each.
pub(crate) struct Skeleton<'a> {
    pub field: &'a VectorFieldSpec,
    pub x0: &'a [f64],
    pub k: usize,
    pub substeps: usize,
}

struct Local {
    f: Vec<f64>,
    a: Vec<f64>,
    s: Vec<f64>,
    dsig: Vec<f64>,
}

impl<'a> Skeleton<'a> {
    pub fn new(field: &'a VectorFieldSpec, x0: &'a [f64], k: usize, substeps: usize) -> Result<Self> {
        if x0.len() != field.d() {
            return Err(Error::Dimension {
                expected: field.d(),
                got: x0.len(),
            });
        }
        if k == 0 || substeps == 0 {
            return Err(Error::param("k", "need at least one interval and one step"));
        }
        Ok(Skeleton { field, x0, k, substeps })
    }

    pub fn steps(&self) -> usize {
        self.k * self.substeps
    }

    fn dt(&self) -> f64 {
        1.0 / self.steps() as f64
    }

    fn local(&self) -> Local {
        let (d, m) = (self.field.d(), self.field.m());
        Local {
            f: vec![0.0; d],
            a: vec![0.0; d * d],
            s: vec![0.0; d * m],
            dsig: vec![0.0; d * m * d],
        }
    }

    /// `F = b + σh`, and with `jac` also `A = ∇F` and `S = σ`.
    fn eval(&self, x: &[f64], h: &[f64], jac: bool, e: &mut Local) -> Result<()> {
        let (d, m) = (self.field.d(), self.field.m());
        self.field.drift(x, &mut e.f);
        self.field.diffusion(x, &mut e.s);
        for i in 0..d {
            e.f[i] += (0..m).map(|l| e.s[i * m + l] * h[l]).sum::<f64>();
        }
        if jac {
            self.field.drift_jacobian(x, &mut e.a)?;
            self.field.diffusion_jacobian(x, &mut e.dsig)?;
            for i in 0..d {
                for q in 0..d {
                    e.a[i * d + q] += (0..m).map(|l| e.dsig[(i * m + l) * d + q] * h[l]).sum::<f64>();
                }
            }
        }
        Ok(())
    }

    /// States `x_0, …, x_N`, row-major.
    pub fn forward(&self, h: &[f64]) -> Result<Vec<f64>> {
        let (d, m) = (self.field.d(), self.field.m());
        let dt = self.dt();
        let mut out = Vec::with_capacity((self.steps() + 1) * d);
        out.extend_from_slice(self.x0);
        let (mut e1, mut e2) = (self.local(), self.local());
        let mut x = self.x0.to_vec();
        let mut y = vec![0.0; d];
        for n in 0..self.steps() {
            let hc = &h[(n / self.substeps) * m..(n / self.substeps + 1) * m];
            self.eval(&x, hc, false, &mut e1)?;
            for i in 0..d {
                y[i] = x[i] + dt * e1.f[i];
            }
            self.eval(&y, hc, false, &mut e2)?;
            for i in 0..d {
                x[i] += 0.5 * dt * (e1.f[i] + e2.f[i]);
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("skeleton left every bounded set at step {n}")));
            }
            out.extend_from_slice(&x);
        }
        Ok(out)
    }

    /// `∂Φ/∂h` for `Φ` whose only state dependence is `∂Φ/∂x_{n*} = g`.
    pub fn adjoint(&self, h: &[f64], states: &[f64], at: usize, g: &[f64]) -> Result<Vec<f64>> {
        let (d, m) = (self.field.d(), self.field.m());
        let dt = self.dt();
        let mut grad = vec![0.0; self.k * m];
        let mut lam = g.to_vec();
        let (mut e1, mut e2) = (self.local(), self.local());
        let mut y = vec![0.0; d];
        let mut mx = vec![0.0; d * d];
        let mut mh = vec![0.0; d * m];
        let mut next = vec![0.0; d];
        for n in (0..at).rev() {
            let cell = n / self.substeps;
            let hc = &h[cell * m..(cell + 1) * m];
            let x = &states[n * d..(n + 1) * d];
            self.eval(x, hc, true, &mut e1)?;
            for i in 0..d {
                y[i] = x[i] + dt * e1.f[i];
            }
            self.eval(&y, hc, true, &mut e2)?;
            // ∂x'/∂x = I + dt/2 (A_x + A_y (I + dt A_x))
            for i in 0..d {
                for j in 0..d {
                    let ay_ax: f64 = (0..d).map(|q| e2.a[i * d + q] * e1.a[q * d + j]).sum();
                    let id = if i == j { 1.0 } else { 0.0 };
                    mx[i * d + j] = id + 0.5 * dt * (e1.a[i * d + j] + e2.a[i * d + j] + dt * ay_ax);
                }
            }
            // ∂x'/∂h = dt/2 (S_x + S_y + dt A_y S_x)
            for i in 0..d {
                for l in 0..m {
                    let ay_sx: f64 = (0..d).map(|q| e2.a[i * d + q] * e1.s[q * m + l]).sum();
                    mh[i * m + l] = 0.5 * dt * (e1.s[i * m + l] + e2.s[i * m + l] + dt * ay_sx);
                }
            }
            for l in 0..m {
                grad[cell * m + l] += (0..d).map(|i| mh[i * m + l] * lam[i]).sum::<f64>();
            }
            for j in 0..d {
                next[j] = (0..d).map(|i| mx[i * d + j] * lam[i]).sum();
            }
            lam.copy_from_slice(&next);
        }
        Ok(grad)
    }
}
