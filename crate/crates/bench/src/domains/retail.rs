//! Retail store: users with payment methods, products with variants, and
//! orders. Amounts are integer cents.

use agent_core::protocol::ToolSpec;
use serde_json::{json, Value};

use super::{charge, entity, entity_mut, int_arg, push_payment, spec, str_arg, str_list};

pub const CANCEL_REASONS: [&str; 2] = ["no longer needed", "ordered by mistake"];

fn string() -> Value {
    json!({"type": "string"})
}

fn strings() -> Value {
    json!({"type": "array", "items": {"type": "string"}})
}

pub fn tool_specs(consolidated: bool) -> Vec<ToolSpec> {
    let mut specs = vec![
        spec("find_user_id_by_email", "Find a user id by email address.", json!({"email": string()}), &["email"]),
        spec("get_user_details", "Get a user's profile and payment methods.", json!({"user_id": string()}), &["user_id"]),
        spec("get_order_details", "Get the status, items and payments of an order.", json!({"order_id": string()}), &["order_id"]),
        spec("get_product_details", "Get a product and its variants.", json!({"product_id": string()}), &["product_id"]),
        spec("check_item_stock", "Check whether a product variant is available.", json!({"item_id": string()}), &["item_id"]),
        spec("get_item_price", "Get the price of a product variant.", json!({"item_id": string()}), &["item_id"]),
        spec(
            "cancel_pending_order",
            "Cancel a pending order and refund it to the original payment method.",
            json!({"order_id": string(), "reason": {"type": "string", "enum": CANCEL_REASONS}}),
            &["order_id", "reason"],
        ),
        spec(
            "modify_pending_order_address",
            "Change the shipping address of a pending order.",
            json!({
                "order_id": string(),
                "address": {
                    "type": "object",
                    "properties": {"address1": string(), "city": string(), "zip": string()},
                    "required": ["address1", "city", "zip"],
                    "additionalProperties": false
                }
            }),
            &["order_id", "address"],
        ),
        spec(
            "record_item_exchange",
            "Swap delivered items for other variants of the same products.",
            json!({"order_id": string(), "item_ids": strings(), "new_item_ids": strings()}),
            &["order_id", "item_ids", "new_item_ids"],
        ),
        spec(
            "settle_price_difference",
            "Charge (positive) or refund (negative) an exchange price difference.",
            json!({"order_id": string(), "payment_method_id": string(), "amount_cents": {"type": "integer"}}),
            &["order_id", "payment_method_id", "amount_cents"],
        ),
        spec(
            "record_item_return",
            "Mark delivered items of an order as returned.",
            json!({"order_id": string(), "item_ids": strings()}),
            &["order_id", "item_ids"],
        ),
        spec(
            "issue_refund",
            "Refund an amount for an order to a payment method of its owner.",
            json!({"order_id": string(), "payment_method_id": string(), "amount_cents": {"type": "integer"}}),
            &["order_id", "payment_method_id", "amount_cents"],
        ),
    ];
    if consolidated {
        specs.push(spec(
            "exchange_delivered_order_items",
            "Exchange delivered items of a user's order and settle the price difference in one step.",
            json!({
                "user_id": string(),
                "order_id": string(),
                "item_ids": strings(),
                "new_item_ids": strings(),
                "payment_method_id": string()
            }),
            &["user_id", "order_id", "item_ids", "new_item_ids", "payment_method_id"],
        ));
        specs.push(spec(
            "process_return_request",
            "Return delivered items of a user's order and refund their price in one step.",
            json!({"user_id": string(), "order_id": string(), "item_ids": strings(), "payment_method_id": string()}),
            &["user_id", "order_id", "item_ids", "payment_method_id"],
        ));
    }
    specs
}

pub fn call(state: &mut Value, function: &str, args: &Value) -> Result<Value, String> {
    match function {
        "find_user_id_by_email" => {
            let email = str_arg(args, "email")?;
            state["users"]
                .as_object()
                .and_then(|users| users.values().find(|u| u["email"] == email))
                .map(|u| u["user_id"].clone())
                .ok_or_else(|| format!("no user with email {email}"))
        }
        "get_user_details" => entity(state, "users", str_arg(args, "user_id")?, "user").cloned(),
        "get_order_details" => entity(state, "orders", str_arg(args, "order_id")?, "order").cloned(),
        "get_product_details" => entity(state, "products", str_arg(args, "product_id")?, "product").cloned(),
        "check_item_stock" => {
            let (_, variant) = variant(state, str_arg(args, "item_id")?)?;
            Ok(json!({"item_id": variant["item_id"], "available": variant["available"]}))
        }
        "get_item_price" => {
            let (_, variant) = variant(state, str_arg(args, "item_id")?)?;
            Ok(json!({"item_id": variant["item_id"], "price_cents": variant["price_cents"]}))
        }
        "cancel_pending_order" => cancel(state, str_arg(args, "order_id")?, str_arg(args, "reason")?),
        "modify_pending_order_address" => {
            let order = pending_order(state, str_arg(args, "order_id")?)?;
            order["address"] = args["address"].clone();
            Ok(order.clone())
        }
        "record_item_exchange" => {
            let order_id = str_arg(args, "order_id")?;
            exchange(state, order_id, &str_list(args, "item_ids")?, &str_list(args, "new_item_ids")?)?;
            Ok(state["orders"][order_id].clone())
        }
        "settle_price_difference" => {
            let order_id = str_arg(args, "order_id")?;
            let amount = int_arg(args, "amount_cents")?;
            settle(state, order_id, str_arg(args, "payment_method_id")?, "price_difference", amount)?;
            Ok(json!({"order_id": order_id, "amount_cents": amount}))
        }
        "record_item_return" => {
            let order_id = str_arg(args, "order_id")?;
            record_return(state, order_id, &str_list(args, "item_ids")?)?;
            Ok(state["orders"][order_id].clone())
        }
        "issue_refund" => {
            let order_id = str_arg(args, "order_id")?;
            let amount = int_arg(args, "amount_cents")?;
            if amount <= 0 {
                return Err("refund amount must be positive".into());
            }
            settle(state, order_id, str_arg(args, "payment_method_id")?, "refund", -amount)?;
            Ok(json!({"order_id": order_id, "refunded_cents": amount}))
        }
        "exchange_delivered_order_items" => {
            let order_id = str_arg(args, "order_id")?;
            owned_by(state, order_id, str_arg(args, "user_id")?)?;
            let old = str_list(args, "item_ids")?;
            let difference = exchange(state, order_id, &old, &str_list(args, "new_item_ids")?)?;
            settle(state, order_id, str_arg(args, "payment_method_id")?, "price_difference", difference)?;
            Ok(json!({"order": state["orders"][order_id], "price_difference_cents": difference}))
        }
        "process_return_request" => {
            let order_id = str_arg(args, "order_id")?;
            owned_by(state, order_id, str_arg(args, "user_id")?)?;
            let refund = record_return(state, order_id, &str_list(args, "item_ids")?)?;
            settle(state, order_id, str_arg(args, "payment_method_id")?, "refund", -refund)?;
            Ok(json!({"order": state["orders"][order_id], "refunded_cents": refund}))
        }
        other => Err(format!("unknown retail function {other}")),
    }
}

fn variant<'a>(state: &'a Value, item_id: &str) -> Result<(&'a Value, &'a Value), String> {
    state["products"]
        .as_object()
        .into_iter()
        .flat_map(|products| products.values())
        .find_map(|p| p["variants"].get(item_id).map(|v| (p, v)))
        .ok_or_else(|| format!("item {item_id} not found"))
}

fn owned_by(state: &Value, order_id: &str, user_id: &str) -> Result<(), String> {
    let order = entity(state, "orders", order_id, "order")?;
    if order["user_id"] != user_id {
        return Err(format!("order {order_id} does not belong to user {user_id}"));
    }
    Ok(())
}

fn pending_order<'a>(state: &'a mut Value, order_id: &str) -> Result<&'a mut Value, String> {
    let order = entity_mut(state, "orders", order_id, "order")?;
    if order["status"] != "pending" {
        return Err(format!("order {order_id} is {}, not pending", order["status"].as_str().unwrap_or("?")));
    }
    Ok(order)
}

fn delivered_order<'a>(state: &'a mut Value, order_id: &str) -> Result<&'a mut Value, String> {
    let order = entity_mut(state, "orders", order_id, "order")?;
    if order["status"] != "delivered" {
        return Err(format!("order {order_id} is {}, not delivered", order["status"].as_str().unwrap_or("?")));
    }
    Ok(order)
}

fn order_total(order: &Value) -> i64 {
    order["payment_history"]
        .as_array()
        .into_iter()
        .flatten()
        .filter(|p| p["kind"] == "payment")
        .filter_map(|p| p["amount_cents"].as_i64())
        .sum()
}

fn cancel(state: &mut Value, order_id: &str, reason: &str) -> Result<Value, String> {
    if !CANCEL_REASONS.contains(&reason) {
        return Err(format!("invalid cancellation reason {reason:?}"));
    }
    let order = pending_order(state, order_id)?;
    let total = order_total(order);
    let method = order["payment_history"][0]["payment_method_id"]
        .as_str()
        .ok_or("order has no original payment")?
        .to_string();
    let user_id = order["user_id"].as_str().unwrap_or_default().to_string();
    order["status"] = json!("cancelled");
    order["cancel_reason"] = json!(reason);
    push_payment(order, "refund", &method, total);
    charge(state, &user_id, &method, -total)?;
    Ok(state["orders"][order_id].clone())
}

/// Returns the price difference (new minus old) in cents.
fn exchange(state: &mut Value, order_id: &str, old: &[String], new: &[String]) -> Result<i64, String> {
    if old.is_empty() || old.len() != new.len() {
        return Err("item_ids and new_item_ids must be non-empty and of equal length".into());
    }
    let mut swaps = Vec::new();
    for (old_id, new_id) in old.iter().zip(new) {
        let (product, replacement) = variant(state, new_id)?;
        if replacement["available"] != true {
            return Err(format!("item {new_id} is out of stock"));
        }
        swaps.push((old_id.clone(), new_id.clone(), product["product_id"].clone(), replacement["price_cents"].as_i64().unwrap_or(0)));
    }
    let order = delivered_order(state, order_id)?;
    let mut difference = 0;
    let mut log = Vec::new();
    for (old_id, new_id, product_id, price) in swaps {
        let line = order["items"]
            .as_array_mut()
            .and_then(|items| items.iter_mut().find(|i| i["item_id"] == old_id.as_str()))
            .ok_or_else(|| format!("item {old_id} is not in order {order_id}"))?;
        if line["product_id"] != product_id {
            return Err(format!("item {new_id} is not a variant of the same product as {old_id}"));
        }
        difference += price - line["price_cents"].as_i64().unwrap_or(0);
        *line = json!({"item_id": new_id, "product_id": product_id, "price_cents": price});
        log.push(json!({"item_id": old_id, "new_item_id": new_id}));
    }
    order["status"] = json!("exchanged");
    order["exchanges"] = Value::Array(log);
    Ok(difference)
}

/// Returns the refundable amount of the returned items in cents.
fn record_return(state: &mut Value, order_id: &str, item_ids: &[String]) -> Result<i64, String> {
    if item_ids.is_empty() {
        return Err("item_ids must not be empty".into());
    }
    let order = delivered_order(state, order_id)?;
    let mut refund = 0;
    for id in item_ids {
        let line = order["items"]
            .as_array()
            .and_then(|items| items.iter().find(|i| i["item_id"] == id.as_str()))
            .ok_or_else(|| format!("item {id} is not in order {order_id}"))?;
        refund += line["price_cents"].as_i64().unwrap_or(0);
    }
    order["status"] = json!("returned");
    order["returned_items"] = json!(item_ids);
    Ok(refund)
}

/// Record a payment movement on the order and apply it to the owner's
/// method. Positive `amount` charges the customer; negative refunds.
fn settle(state: &mut Value, order_id: &str, method: &str, kind: &str, amount: i64) -> Result<(), String> {
    let order = entity(state, "orders", order_id, "order")?;
    let user_id = order["user_id"].as_str().unwrap_or_default().to_string();
    charge(state, &user_id, method, amount)?;
    let order = entity_mut(state, "orders", order_id, "order")?;
    let recorded = if kind == "refund" { -amount } else { amount };
    push_payment(order, kind, method, recorded);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{state_hash, Domain, DomainBackend};
    use agent_core::providers::ToolBackend;

    fn fixture() -> Value {
        crate::fixtures::Fixtures::default().state(Domain::Retail).unwrap()
    }

    #[test]
    fn consolidated_exchange_matches_fine_grained_sequence() {
        let fine = DomainBackend::new(Domain::Retail, fixture());
        let old = json!(["i_ts_red_m", "i_kettle_1l"]);
        let new = json!(["i_ts_blue_m", "i_kettle_2l"]);
        fine.call("record_item_exchange", &json!({"order_id": "#W1087", "item_ids": old, "new_item_ids": new}))
            .unwrap();
        fine.call(
            "settle_price_difference",
            &json!({"order_id": "#W1087", "payment_method_id": "gift_card_2001", "amount_cents": 900}),
        )
        .unwrap();

        let coarse = DomainBackend::new(Domain::Retail, fixture());
        let out = coarse
            .call(
                "exchange_delivered_order_items",
                &json!({"user_id": "u_alice", "order_id": "#W1087", "item_ids": old, "new_item_ids": new, "payment_method_id": "gift_card_2001"}),
            )
            .unwrap();
        assert_eq!(out["price_difference_cents"], 900);
        assert_eq!(fine.hash(), coarse.hash());
        assert_eq!(coarse.snapshot()["users"]["u_alice"]["payment_methods"]["gift_card_2001"]["balance_cents"], 4100);
    }

    #[test]
    fn consolidated_return_matches_fine_grained_sequence() {
        let fine = DomainBackend::new(Domain::Retail, fixture());
        fine.call("record_item_return", &json!({"order_id": "#W3002", "item_ids": ["i_ts_blue_m", "i_mug_large"]}))
            .unwrap();
        fine.call(
            "issue_refund",
            &json!({"order_id": "#W3002", "payment_method_id": "gift_card_2003", "amount_cents": 3298}),
        )
        .unwrap();
        let coarse = DomainBackend::new(Domain::Retail, fixture());
        coarse
            .call(
                "process_return_request",
                &json!({"user_id": "u_cara", "order_id": "#W3002", "item_ids": ["i_ts_blue_m", "i_mug_large"], "payment_method_id": "gift_card_2003"}),
            )
            .unwrap();
        assert_eq!(fine.hash(), coarse.hash());
    }

    #[test]
    fn policy_rules_enforced_by_tools() {
        let b = DomainBackend::new(Domain::Retail, fixture());
        let initial = state_hash(&fixture());
        assert!(b
            .call("modify_pending_order_address", &json!({"order_id": "#W4001", "address": {"address1": "x", "city": "y", "zip": "z"}}))
            .is_err());
        assert!(b.call("record_item_exchange", &json!({"order_id": "#W3001", "item_ids": ["i_hp_wired"], "new_item_ids": ["i_mug_large"]})).is_err());
        assert!(b.call("record_item_exchange", &json!({"order_id": "#W3002", "item_ids": ["i_ts_blue_m"], "new_item_ids": ["i_ts_blue_l"]})).is_err());
        assert!(b
            .call("exchange_delivered_order_items", &json!({"user_id": "u_bob", "order_id": "#W3001", "item_ids": ["i_hp_wired"], "new_item_ids": ["i_hp_wireless"], "payment_method_id": "credit_card_1002"}))
            .is_err());
        assert!(b.call("settle_price_difference", &json!({"order_id": "#W1001", "payment_method_id": "gift_card_2001", "amount_cents": 999999})).is_err());
        assert_eq!(b.hash(), initial);
        assert_eq!(b.call("find_user_id_by_email", &json!({"email": "dan@example.com"})).unwrap(), "u_dan");
    }
}
