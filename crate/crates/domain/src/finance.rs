//! Per-term invoices and simulated card payments.

use crate::error::invalid;
use crate::*;

pub fn invoice_id(student: &str, term: &str) -> String {
    format!("INV-{student}-{term}")
}

/// Appends a line to the student's invoice for `term`, creating it if needed.
///
/// When a negative line drops the total below what was already paid, the
/// excess is returned as a refund payment so that `paid <= total` holds.
pub(crate) fn add_line(repo: &mut dyn Repo, student: &str, term: &str, description: String, amount: i64) -> DomainResult<Invoice> {
    let id = invoice_id(student, term);
    let mut inv = load::<Invoice>(repo, &id)?.unwrap_or_else(|| Invoice {
        id: id.clone(),
        student: student.to_string(),
        term: term.to_string(),
        lines: Vec::new(),
        total: 0,
        paid: 0,
    });
    inv.lines.push(InvoiceLine { description, amount });
    inv.total += amount;
    if inv.paid > inv.total {
        let refund = inv.paid - inv.total.max(0);
        record_payment(repo, &id, -refund, "refund".into(), 0)?;
        inv.paid -= refund;
    }
    save(repo, &inv)?;
    Ok(inv)
}

fn record_payment(repo: &mut dyn Repo, invoice: &str, amount: i64, card_reference: String, timestamp: i64) -> DomainResult<Payment> {
    let n = next_counter(repo, "payment")?;
    let p = Payment { id: format!("PAY{n:06}"), invoice: invoice.to_string(), amount, card_reference, timestamp };
    save(repo, &p)?;
    Ok(p)
}

/// The caller's own invoices.
pub fn invoices(repo: &dyn Repo, actor: &Actor) -> DomainResult<Vec<Invoice>> {
    if !actor.role.is_student() {
        return Err(DomainError::NotAuthorized("invoices belong to students".into()));
    }
    scan::<Invoice>(repo, &format!("INV-{}-", actor.id))
}

pub fn payments(repo: &dyn Repo, invoice: &str) -> DomainResult<Vec<Payment>> {
    scan::<Payment>(repo, &format!("{invoice}/"))
}

/// Pays part or all of the outstanding balance through the simulated card
/// gateway, which declines references ending in the configured suffix.
pub fn pay_invoice(
    repo: &mut dyn Repo,
    policy: &Policy,
    actor: &Actor,
    invoice: &str,
    amount: i64,
    card_reference: &str,
    now: i64,
) -> DomainResult<Payment> {
    let mut inv = load::<Invoice>(repo, invoice)?.ok_or_else(|| DomainError::UnknownInvoice(invoice.to_string()))?;
    if inv.student != actor.id {
        return Err(DomainError::NotYours(invoice.to_string()));
    }
    if amount <= 0 {
        return Err(invalid("payment amount must be positive"));
    }
    let card = card_reference.trim();
    if card.is_empty() {
        return Err(invalid("card reference is required"));
    }
    let outstanding = inv.total - inv.paid;
    if amount > outstanding {
        return Err(DomainError::Overpayment(outstanding));
    }
    if !policy.decline_suffix.is_empty() && card.ends_with(&policy.decline_suffix) {
        return Err(DomainError::GatewayDeclined(card.to_string()));
    }
    let p = record_payment(repo, invoice, amount, card.to_string(), now)?;
    inv.paid += amount;
    save(repo, &inv)?;
    Ok(p)
}
