use super::params::ParameterVector;
use crate::error::{Component, Error, Result};
use crate::scalar::{all_finite, Scalar};

/// Adam optimizer state for one parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    first_moment: Vec<T>,
    second_moment: Vec<T>,
    step_count: u64,
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(num_params: usize, learning_rate: T) -> Self {
        Self {
            first_moment: vec![T::zero(); num_params],
            second_moment: vec![T::zero(); num_params],
            step_count: 0,
            learning_rate,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            epsilon: T::lit(1e-8),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[T] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[T] {
        &self.second_moment
    }

    /// One bias-corrected descent step. A gradient or result containing a
    /// non-finite entry leaves both `params` and the state untouched.
    pub fn step(&mut self, params: &mut ParameterVector<T>, grad: &ParameterVector<T>) -> Result<()> {
        let n = params.len();
        if grad.len() != n || self.first_moment.len() != n {
            return Err(Error::Config(format!(
                "adam: parameter length {n}, gradient length {}, state length {}",
                grad.len(),
                self.first_moment.len()
            )));
        }
        if !grad.is_finite() {
            return Err(Error::numeric(
                Component::Optimizer,
                "non-finite gradient entry, step refused",
            ));
        }
        let t = self.step_count + 1;
        let one = T::one();
        let bc1 = one - self.beta1.powi(t as i32);
        let bc2 = one - self.beta2.powi(t as i32);
        let mut m = self.first_moment.clone();
        let mut v = self.second_moment.clone();
        let mut next = params.values().to_vec();
        for i in 0..n {
            let g = grad.values()[i];
            m[i] = self.beta1 * m[i] + (one - self.beta1) * g;
            v[i] = self.beta2 * v[i] + (one - self.beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            next[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        if !all_finite(&next) {
            return Err(Error::numeric(
                Component::Optimizer,
                "step would produce non-finite parameters",
            ));
        }
        params.values_mut().copy_from_slice(&next);
        self.first_moment = m;
        self.second_moment = v;
        self.step_count = t;
        Ok(())
    }
}

/// Plain gradient descent.
#[derive(Debug, Clone, Copy)]
pub struct Sgd<T> {
    pub learning_rate: T,
}

impl<T: Scalar> Sgd<T> {
    pub fn step(&self, params: &mut ParameterVector<T>, grad: &ParameterVector<T>) -> Result<()> {
        if grad.len() != params.len() {
            return Err(Error::Config("sgd: gradient length mismatch".into()));
        }
        if !grad.is_finite() {
            return Err(Error::numeric(
                Component::Optimizer,
                "non-finite gradient entry, step refused",
            ));
        }
        params.add_scaled(grad, -self.learning_rate);
        Ok(())
    }
}

fn check_tau<T: Scalar>(tau: T) -> Result<()> {
    if !(tau > T::zero() && tau <= T::one()) {
        return Err(Error::Config(format!("polyak tau {tau} outside (0, 1]")));
    }
    Ok(())
}

/// `tau * online + (1 - tau) * target`, elementwise.
pub fn polyak_update<T: Scalar>(
    target: &ParameterVector<T>,
    online: &ParameterVector<T>,
    tau: T,
) -> Result<ParameterVector<T>> {
    let mut out = target.clone();
    polyak_update_in_place(&mut out, online, tau)?;
    Ok(out)
}

pub fn polyak_update_in_place<T: Scalar>(
    target: &mut ParameterVector<T>,
    online: &ParameterVector<T>,
    tau: T,
) -> Result<()> {
    check_tau(tau)?;
    if !target.same_layout(online) {
        return Err(Error::Config("polyak update between different layouts".into()));
    }
    if tau == T::one() {
        target.values_mut().copy_from_slice(online.values());
        return Ok(());
    }
    // Written as t + tau (o - t) so that t == o is an exact fixed point.
    for (t, &o) in target.values_mut().iter_mut().zip(online.values()) {
        *t += tau * (o - *t);
    }
    Ok(())
}
