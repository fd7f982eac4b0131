use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum RegisterOp<V> {
    Read {
        register: usize,
        value: V,
    },
    Write {
        register: usize,
        value: V,
    },
    Cas {
        register: usize,
        old: V,
        new: V,
        previous: V,
    },
    Scan {
        values: Vec<V>,
    },
}

/// Atomic registers. Each method is one linearized operation.
#[derive(Clone, Debug)]
pub struct RegisterSpace<V> {
    registers: Vec<V>,
    log: Vec<RegisterOp<V>>,
}

impl<V: Clone + PartialEq> RegisterSpace<V> {
    pub fn new(n: usize, init: V) -> Self {
        RegisterSpace {
            registers: vec![init; n],
            log: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.registers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registers.is_empty()
    }

    fn check(&self, register: usize) -> Result<()> {
        if register < self.registers.len() {
            Ok(())
        } else {
            Err(Error::ContractViolation(format!(
                "register {register} does not exist"
            )))
        }
    }

    pub fn read(&mut self, register: usize) -> Result<V> {
        self.check(register)?;
        let value = self.registers[register].clone();
        self.log.push(RegisterOp::Read {
            register,
            value: value.clone(),
        });
        Ok(value)
    }

    pub fn write(&mut self, register: usize, value: V) -> Result<()> {
        self.check(register)?;
        self.registers[register] = value.clone();
        self.log.push(RegisterOp::Write { register, value });
        Ok(())
    }

    /// Swap in `new` iff the register holds `old`; returns the prior value.
    pub fn cas(&mut self, register: usize, old: &V, new: V) -> Result<V> {
        self.check(register)?;
        let previous = self.registers[register].clone();
        if &previous == old {
            self.registers[register] = new.clone();
        }
        self.log.push(RegisterOp::Cas {
            register,
            old: old.clone(),
            new,
            previous: previous.clone(),
        });
        Ok(previous)
    }

    /// Atomic read of every register.
    pub fn scan(&mut self) -> Vec<V> {
        let values = self.registers.clone();
        self.log.push(RegisterOp::Scan {
            values: values.clone(),
        });
        values
    }

    pub fn ops_log(&self) -> &[RegisterOp<V>] {
        &self.log
    }
}
