use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kron::{Factor, KroneckerSumOperator, Term};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverflowParams {
    /// Capacity `k_i`; queue `i` holds `0..=k_i` customers.
    pub capacities: Vec<usize>,
    pub arrival_rates: Vec<f64>,
    pub service_rates: Vec<f64>,
}

impl OverflowParams {
    pub fn new(capacities: Vec<usize>, arrival_rates: Vec<f64>, service_rates: Vec<f64>) -> Result<Self> {
        let p = Self { capacities, arrival_rates, service_rates };
        p.validate()?;
        Ok(p)
    }

    /// Uniform capacity with arrival rates `1.2, 1.1, 1.0, ...` (floored at
    /// 0.1) and unit service rates.
    pub fn standard(queues: usize, capacity: usize) -> Self {
        Self {
            capacities: vec![capacity; queues],
            arrival_rates: (0..queues).map(|i| (1.2 - 0.1 * i as f64).max(0.1)).collect(),
            service_rates: vec![1.0; queues],
        }
    }

    pub fn uniform(queues: usize, capacity: usize, arrival: f64, service: f64) -> Self {
        Self {
            capacities: vec![capacity; queues],
            arrival_rates: vec![arrival; queues],
            service_rates: vec![service; queues],
        }
    }

    pub fn queues(&self) -> usize {
        self.capacities.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.capacities.iter().map(|k| k + 1).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.capacities.len();
        if j == 0 {
            return Err(invalid("overflow model needs at least one queue"));
        }
        if self.arrival_rates.len() != j || self.service_rates.len() != j {
            return Err(invalid(format!(
                "overflow model has {j} queues but {} arrival and {} service rates",
                self.arrival_rates.len(),
                self.service_rates.len()
            )));
        }
        if self.capacities.contains(&0) {
            return Err(invalid("queue capacities must be at least 1"));
        }
        let rates = self.arrival_rates.iter().chain(&self.service_rates);
        if rates.clone().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(invalid("overflow rates must be positive and finite"));
        }
        Ok(())
    }

    fn local_factor(&self, i: usize) -> DMatrix<f64> {
        let n = self.capacities[i] + 1;
        let (lambda, mu) = (self.arrival_rates[i], self.service_rates[i]);
        DMatrix::from_fn(n, n, |r, c| {
            if r == c + 1 {
                lambda
            } else if r + 1 == c {
                mu
            } else {
                0.0
            }
        })
    }

    fn lifted(&self, mode: usize, factor: DMatrix<f64>) -> Vec<Factor> {
        let mut fs: Vec<Factor> = self.dims().into_iter().map(Factor::Identity).collect();
        fs[mode] = Factor::from_dense(factor);
        fs
    }
}

/// Local birth-death terms plus adjacent overflow terms, completed to a
/// generator.
pub fn build_overflow(p: &OverflowParams) -> Result<KroneckerSumOperator> {
    p.validate()?;
    let dims = p.dims();
    let mut terms: Vec<Term> = (0..p.queues()).map(|i| Term::new(1.0, p.lifted(i, p.local_factor(i)))).collect();
    for i in 0..p.queues().saturating_sub(1) {
        let (n, m) = (dims[i], dims[i + 1]);
        let mut full = DMatrix::zeros(n, n);
        full[(n - 1, n - 1)] = p.arrival_rates[i];
        let shift = DMatrix::from_fn(m, m, |r, c| if r == c + 1 { 1.0 } else { 0.0 });
        let mut fs = p.lifted(i, full);
        fs[i + 1] = Factor::from_dense(shift);
        terms.push(Term::new(1.0, fs));
    }
    KroneckerSumOperator::new(terms)?.complete_generator()
}

/// Local terms only: every term is the identity outside its own queue.
pub fn build_overflow_non_interacting(p: &OverflowParams) -> Result<KroneckerSumOperator> {
    p.validate()?;
    let terms = (0..p.queues()).map(|i| Term::new(1.0, p.lifted(i, p.local_factor(i)))).collect();
    KroneckerSumOperator::new(terms)?.complete_generator()
}

/// Stationary law of one birth-death queue, `pi_s ∝ (lambda/mu)^s`.
pub fn birth_death_stationary(capacity: usize, arrival: f64, service: f64) -> Vec<f64> {
    let rho = arrival / service;
    let mut v: Vec<f64> = (0..=capacity).map(|s| rho.powi(s as i32)).collect();
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    v
}
