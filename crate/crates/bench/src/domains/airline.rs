//! Airline: users with memberships, dated flights with per-cabin prices, and
//! reservations carrying their fare rules.

use agent_core::protocol::ToolSpec;
use serde_json::{json, Value};

use super::{charge, entity, entity_mut, int_arg, push_payment, spec, str_arg, str_list};

pub const BAG_FEE_CENTS: i64 = 5000;

pub fn tool_specs() -> Vec<ToolSpec> {
    let string = json!({"type": "string"});
    vec![
        spec("get_user_details", "Get a user's profile, membership and payment methods.", json!({"user_id": string}), &["user_id"]),
        spec(
            "get_reservation_details",
            "Get a reservation with its flights, cabin, fare rules and payments.",
            json!({"reservation_id": string}),
            &["reservation_id"],
        ),
        spec(
            "search_flights",
            "List flights on a route and date.",
            json!({"origin": string, "destination": string, "date": string}),
            &["origin", "destination", "date"],
        ),
        spec(
            "cancel_reservation",
            "Cancel a reservation and refund everything paid to the original payment method.",
            json!({"reservation_id": string}),
            &["reservation_id"],
        ),
        spec(
            "update_reservation_flight",
            "Replace the flights of a reservation; the fare difference is charged or refunded.",
            json!({"reservation_id": string, "flights": {"type": "array", "items": {"type": "string"}}, "payment_method_id": string}),
            &["reservation_id", "flights", "payment_method_id"],
        ),
        spec(
            "update_reservation_cabin",
            "Change the cabin of a reservation; the fare difference is charged or refunded.",
            json!({"reservation_id": string, "cabin": {"type": "string", "enum": ["economy", "business"]}, "payment_method_id": string}),
            &["reservation_id", "cabin", "payment_method_id"],
        ),
        spec(
            "update_reservation_baggages",
            "Set the number of checked bags; bags beyond the free allowance are charged.",
            json!({"reservation_id": string, "total_baggages": {"type": "integer"}, "payment_method_id": string}),
            &["reservation_id", "total_baggages", "payment_method_id"],
        ),
    ]
}

pub fn call(state: &mut Value, function: &str, args: &Value) -> Result<Value, String> {
    match function {
        "get_user_details" => entity(state, "users", str_arg(args, "user_id")?, "user").cloned(),
        "get_reservation_details" => {
            entity(state, "reservations", str_arg(args, "reservation_id")?, "reservation").cloned()
        }
        "search_flights" => {
            let (origin, destination, date) =
                (str_arg(args, "origin")?, str_arg(args, "destination")?, str_arg(args, "date")?);
            let found: Vec<Value> = state["flights"]
                .as_object()
                .into_iter()
                .flat_map(|f| f.values())
                .filter(|f| f["origin"] == origin && f["destination"] == destination && f["date"] == date)
                .cloned()
                .collect();
            Ok(Value::Array(found))
        }
        // Refunds unconditionally; the fare rule is policy, not mechanism.
        "cancel_reservation" => {
            let id = str_arg(args, "reservation_id")?;
            let reservation = active(state, id)?;
            let paid = net_paid(reservation);
            let method = reservation["payment_history"][0]["payment_method_id"]
                .as_str()
                .ok_or("reservation has no original payment")?
                .to_string();
            let user_id = reservation["user_id"].as_str().unwrap_or_default().to_string();
            reservation["status"] = json!("cancelled");
            push_payment(reservation, "refund", &method, paid);
            charge(state, &user_id, &method, -paid)?;
            Ok(state["reservations"][id].clone())
        }
        "update_reservation_flight" => {
            let id = str_arg(args, "reservation_id")?;
            let flights = str_list(args, "flights")?;
            let reservation = active(state, id)?.clone();
            let cabin = reservation["cabin"].as_str().unwrap_or("economy");
            for number in &flights {
                let flight = entity(state, "flights", number, "flight")?;
                if flight["origin"] != reservation["origin"] || flight["destination"] != reservation["destination"] {
                    return Err(format!("flight {number} is not on the reservation's route"));
                }
            }
            let old = fare(state, &str_list(&reservation, "flights")?, cabin)?;
            let new = fare(state, &flights, cabin)?;
            let method = str_arg(args, "payment_method_id")?;
            settle(state, id, method, new - old)?;
            active(state, id)?["flights"] = json!(flights);
            Ok(state["reservations"][id].clone())
        }
        // Applies the change whatever the fare rules say.
        "update_reservation_cabin" => {
            let id = str_arg(args, "reservation_id")?;
            let cabin = str_arg(args, "cabin")?;
            let reservation = active(state, id)?.clone();
            let flights = str_list(&reservation, "flights")?;
            let old = fare(state, &flights, reservation["cabin"].as_str().unwrap_or("economy"))?;
            let new = fare(state, &flights, cabin)?;
            settle(state, id, str_arg(args, "payment_method_id")?, new - old)?;
            active(state, id)?["cabin"] = json!(cabin);
            Ok(state["reservations"][id].clone())
        }
        "update_reservation_baggages" => {
            let id = str_arg(args, "reservation_id")?;
            let total = int_arg(args, "total_baggages")?;
            let reservation = active(state, id)?.clone();
            let current = reservation["total_baggages"].as_i64().unwrap_or(0);
            if total < current {
                return Err("checked bags cannot be removed".into());
            }
            let user = entity(state, "users", reservation["user_id"].as_str().unwrap_or_default(), "user")?;
            let free = free_bags(reservation["cabin"].as_str().unwrap_or("economy"), user["membership"].as_str().unwrap_or("regular"));
            let fee = BAG_FEE_CENTS * (total - current.max(free)).max(0);
            if fee > 0 {
                let method = str_arg(args, "payment_method_id")?;
                charge(state, reservation["user_id"].as_str().unwrap_or_default(), method, fee)?;
                push_payment(active(state, id)?, "baggage", method, fee);
            }
            active(state, id)?["total_baggages"] = json!(total);
            Ok(state["reservations"][id].clone())
        }
        other => Err(format!("unknown airline function {other}")),
    }
}

pub fn free_bags(cabin: &str, membership: &str) -> i64 {
    let base = if cabin == "business" { 2 } else { 0 };
    let extra = match membership {
        "gold" => 2,
        "silver" => 1,
        _ => 0,
    };
    base + extra
}

fn active<'a>(state: &'a mut Value, id: &str) -> Result<&'a mut Value, String> {
    let reservation = entity_mut(state, "reservations", id, "reservation")?;
    if reservation["status"] != "active" {
        return Err(format!("reservation {id} is not active"));
    }
    Ok(reservation)
}

fn fare(state: &Value, flights: &[String], cabin: &str) -> Result<i64, String> {
    flights
        .iter()
        .map(|n| {
            entity(state, "flights", n, "flight")?["prices"][cabin]
                .as_i64()
                .ok_or_else(|| format!("flight {n} has no {cabin} cabin"))
        })
        .sum()
}

fn net_paid(reservation: &Value) -> i64 {
    reservation["payment_history"]
        .as_array()
        .into_iter()
        .flatten()
        .map(|p| {
            let amount = p["amount_cents"].as_i64().unwrap_or(0);
            if p["kind"] == "refund" {
                -amount
            } else {
                amount
            }
        })
        .sum()
}

/// Positive `difference` is charged; negative is refunded.
fn settle(state: &mut Value, id: &str, method: &str, difference: i64) -> Result<(), String> {
    if difference == 0 {
        return Ok(());
    }
    let user_id = entity(state, "reservations", id, "reservation")?["user_id"]
        .as_str()
        .unwrap_or_default()
        .to_string();
    charge(state, &user_id, method, difference)?;
    let reservation = active(state, id)?;
    if difference > 0 {
        push_payment(reservation, "payment", method, difference);
    } else {
        push_payment(reservation, "refund", method, -difference);
    }
    Ok(())
}
