//! Customer-service assistant for the retail and airline domains.
//!
//! Each user turn runs three fixed nodes: an extraction call where the model
//! picks an intent function and fills its arguments, the coded procedure for
//! that intent, and a reply call that words the outcome. Gated procedures
//! pass the double-check node before their first write when `dc_enabled`;
//! retail procedures use the consolidated tools when `consolidated_tools`.

use agent_core::protocol::{ChatMessage, LlmRequest, Role};
use serde_json::{json, Value};

use super::intents::intents_for;
use crate::client::{CallError, Client, EXIT_PROTOCOL};
use crate::dc::{double_check, DcError, DcVerdict};

pub const STOP_TOKEN: &str = "###STOP###";

pub const EXTRACT_INSTRUCTION: &str = "If the request can be handled, call exactly one of the provided functions with arguments taken from the conversation. Otherwise reply to the customer directly.";

pub const REPLY_INSTRUCTION: &str = "Write the reply to the customer based on the outcome above.";

enum Halt {
    /// The procedure ended early; the value is its outcome.
    Stop(Value),
    Abort(CallError),
}

struct Procedure<'a> {
    client: &'a mut Client,
    intent: String,
    policy: String,
    dc: bool,
    context: Vec<Value>,
}

impl Procedure<'_> {
    fn outcome(&self, status: &str, extra: Value) -> Value {
        let mut doc = json!({"intent": self.intent, "status": status});
        if let (Some(doc), Some(extra)) = (doc.as_object_mut(), extra.as_object()) {
            doc.extend(extra.clone());
        }
        doc
    }

    fn tool(&mut self, name: &str, args: Value) -> Result<Value, Halt> {
        match self.client.tool(name, args) {
            Ok(doc) if doc["ok"] == true => {
                let value = doc["value"].clone();
                self.context.push(json!({"tool": name, "value": value}));
                Ok(value)
            }
            Ok(doc) => Err(Halt::Stop(self.outcome(
                "failed",
                json!({"tool": name, "error": doc["error"]}),
            ))),
            Err(CallError::Engine(error)) => Err(Halt::Stop(self.outcome(
                "failed",
                json!({"tool": name, "error": error.message}),
            ))),
            Err(e) => Err(Halt::Abort(e)),
        }
    }

    fn gate(&mut self, tool: &str, args: &Value) -> Result<(), Halt> {
        if !self.dc {
            return Ok(());
        }
        let context = Value::Array(self.context.clone());
        match double_check(self.client, tool, args, &self.policy, &context) {
            Ok(DcVerdict::Approve) => Ok(()),
            Ok(DcVerdict::Revise { reason }) => {
                Err(Halt::Stop(self.outcome("revised", json!({"tool": tool, "reason": reason}))))
            }
            Err(DcError::Unparseable(message)) => {
                Err(Halt::Stop(self.outcome("blocked", json!({"tool": tool, "reason": message}))))
            }
            Err(DcError::Call(CallError::Engine(error))) => Err(Halt::Stop(
                self.outcome("blocked", json!({"tool": tool, "reason": error.message})),
            )),
            Err(DcError::Call(e)) => Err(Halt::Abort(e)),
        }
    }

    fn owner_mismatch(&self, what: &str) -> Halt {
        Halt::Stop(self.outcome(
            "failed",
            json!({"error": format!("{what} does not belong to this customer")}),
        ))
    }
}

fn strings(v: &Value) -> Vec<String> {
    v.as_array()
        .map(|a| a.iter().filter_map(|s| s.as_str().map(str::to_string)).collect())
        .unwrap_or_default()
}

fn retail(p: &mut Procedure<'_>, args: &Value, rt: bool) -> Result<Value, Halt> {
    let intent = p.intent.clone();
    let order_id = args["order_id"].clone();
    let user_id = p.tool("find_user_id_by_email", json!({"email": args["email"]}))?;
    let order = |p: &mut Procedure<'_>| -> Result<Value, Halt> {
        let order = p.tool("get_order_details", json!({"order_id": order_id}))?;
        if order["user_id"] != user_id {
            return Err(p.owner_mismatch("order"));
        }
        Ok(order)
    };
    match intent.as_str() {
        "order_status" => {
            let order = order(p)?;
            Ok(p.outcome("done", json!({"order": order})))
        }
        "cancel_order" => {
            order(p)?;
            let call = json!({"order_id": args["order_id"], "reason": args["reason"]});
            p.gate("cancel_pending_order", &call)?;
            let result = p.tool("cancel_pending_order", call)?;
            Ok(p.outcome("done", json!({"result": result})))
        }
        "modify_address" => {
            order(p)?;
            let call = json!({"order_id": args["order_id"], "address": args["address"]});
            p.gate("modify_pending_order_address", &call)?;
            let result = p.tool("modify_pending_order_address", call)?;
            Ok(p.outcome("done", json!({"result": result})))
        }
        "exchange_items" if rt => {
            let call = json!({
                "user_id": user_id,
                "order_id": args["order_id"],
                "item_ids": args["item_ids"],
                "new_item_ids": args["new_item_ids"],
                "payment_method_id": args["payment_method_id"],
            });
            p.gate("exchange_delivered_order_items", &call)?;
            let result = p.tool("exchange_delivered_order_items", call)?;
            Ok(p.outcome("done", json!({"result": result})))
        }
        "exchange_items" => {
            let order = order(p)?;
            let old = strings(&args["item_ids"]);
            let new = strings(&args["new_item_ids"]);
            let mut difference: i64 = 0;
            for (old_id, new_id) in old.iter().zip(&new) {
                let line = order["items"]
                    .as_array()
                    .and_then(|items| items.iter().find(|i| i["item_id"] == old_id.as_str()))
                    .cloned()
                    .unwrap_or(Value::Null);
                p.tool("get_product_details", json!({"product_id": line["product_id"]}))?;
                let stock = p.tool("check_item_stock", json!({"item_id": new_id}))?;
                if stock["available"] != true {
                    return Err(Halt::Stop(p.outcome(
                        "failed",
                        json!({"error": format!("item {new_id} is out of stock")}),
                    )));
                }
                let price = p.tool("get_item_price", json!({"item_id": new_id}))?;
                difference += price["price_cents"].as_i64().unwrap_or(0)
                    - line["price_cents"].as_i64().unwrap_or(0);
            }
            let call = json!({
                "order_id": args["order_id"],
                "item_ids": args["item_ids"],
                "new_item_ids": args["new_item_ids"],
            });
            p.gate("record_item_exchange", &call)?;
            let exchange = p.tool("record_item_exchange", call)?;
            let settled = p.tool(
                "settle_price_difference",
                json!({
                    "order_id": args["order_id"],
                    "payment_method_id": args["payment_method_id"],
                    "amount_cents": difference,
                }),
            )?;
            Ok(p.outcome("done", json!({"result": exchange, "settlement": settled})))
        }
        "return_items" if rt => {
            let call = json!({
                "user_id": user_id,
                "order_id": args["order_id"],
                "item_ids": args["item_ids"],
                "payment_method_id": args["payment_method_id"],
            });
            p.gate("process_return_request", &call)?;
            let result = p.tool("process_return_request", call)?;
            Ok(p.outcome("done", json!({"result": result})))
        }
        "return_items" => {
            let order = order(p)?;
            let ids = strings(&args["item_ids"]);
            let refund: i64 = order["items"]
                .as_array()
                .map(|items| {
                    items
                        .iter()
                        .filter(|i| i["item_id"].as_str().is_some_and(|id| ids.iter().any(|x| x == id)))
                        .filter_map(|i| i["price_cents"].as_i64())
                        .sum()
                })
                .unwrap_or(0);
            let call = json!({"order_id": args["order_id"], "item_ids": args["item_ids"]});
            p.gate("record_item_return", &call)?;
            let returned = p.tool("record_item_return", call)?;
            let refunded = p.tool(
                "issue_refund",
                json!({
                    "order_id": args["order_id"],
                    "payment_method_id": args["payment_method_id"],
                    "amount_cents": refund,
                }),
            )?;
            Ok(p.outcome("done", json!({"result": returned, "refund": refunded})))
        }
        other => Ok(p.outcome("failed", json!({"error": format!("unknown intent {other}")}))),
    }
}

fn airline(p: &mut Procedure<'_>, args: &Value) -> Result<Value, Halt> {
    let intent = p.intent.clone();
    let user = p.tool("get_user_details", json!({"user_id": args["user_id"]}))?;
    let reservation = p.tool(
        "get_reservation_details",
        json!({"reservation_id": args["reservation_id"]}),
    )?;
    if reservation["user_id"] != user["user_id"] {
        return Err(p.owner_mismatch("reservation"));
    }
    let reservation_id = args["reservation_id"].clone();
    let (tool, call) = match intent.as_str() {
        "reservation_info" => return Ok(p.outcome("done", json!({"reservation": reservation}))),
        "cancel_booking" => (
            "cancel_reservation",
            json!({"reservation_id": reservation_id}),
        ),
        "change_flight" => {
            let flights = p.tool(
                "search_flights",
                json!({"origin": args["origin"], "destination": args["destination"], "date": args["date"]}),
            )?;
            let listed = flights
                .as_array()
                .is_some_and(|f| f.iter().any(|f| f["flight_number"] == args["flight_number"]));
            if !listed {
                return Ok(p.outcome(
                    "failed",
                    json!({"error": "requested flight is not available on that route and date"}),
                ));
            }
            (
                "update_reservation_flight",
                json!({
                    "reservation_id": reservation_id,
                    "flights": [args["flight_number"]],
                    "payment_method_id": args["payment_method_id"],
                }),
            )
        }
        "change_cabin" => (
            "update_reservation_cabin",
            json!({
                "reservation_id": reservation_id,
                "cabin": args["cabin"],
                "payment_method_id": args["payment_method_id"],
            }),
        ),
        "add_baggage" => (
            "update_reservation_baggages",
            json!({
                "reservation_id": reservation_id,
                "total_baggages": args["total_baggages"],
                "payment_method_id": args["payment_method_id"],
            }),
        ),
        other => return Ok(p.outcome("failed", json!({"error": format!("unknown intent {other}")}))),
    };
    p.gate(tool, &call)?;
    let result = p.tool(tool, call)?;
    Ok(p.outcome("done", json!({"result": result})))
}

fn snapshot_messages(init: &Value) -> (Vec<ChatMessage>, Option<String>) {
    let mut history = Vec::new();
    for entry in init["snapshot"].as_array().into_iter().flatten() {
        let content = entry["content"].as_str().unwrap_or("").to_string();
        match entry["role"].as_str() {
            Some("user") => history.push(ChatMessage::new(Role::User, content)),
            Some("assistant") => history.push(ChatMessage::new(Role::Assistant, content)),
            _ => {}
        }
    }
    // A trailing user message is the one this execution answers.
    let incoming = match history.last() {
        Some(m) if m.role == Role::User => history.pop().map(|m| m.content),
        _ => None,
    };
    (history, incoming)
}

fn abort(client: Client, error: CallError) -> i32 {
    match error {
        CallError::Engine(e) => client.finish("error", json!({"error": e})),
        CallError::Protocol(_) => EXIT_PROTOCOL,
    }
}

pub fn run(mut client: Client, domain: &str, params: &Value) -> i32 {
    let intents = intents_for(domain);
    let specs: Vec<_> = intents.iter().map(|i| i.spec()).collect();
    let policy = client.init()["policy"].as_str().unwrap_or("").to_string();
    let kb_id = params["kb_id"].as_str().unwrap_or(domain).to_string();
    let dc = client.toggle("dc_enabled");
    let rt = client.toggle("consolidated_tools");
    let (mut history, first) = snapshot_messages(client.init());
    let system = ChatMessage::new(Role::System, format!("{policy}\n\n{EXTRACT_INSTRUCTION}"));

    let mut incoming = first;
    loop {
        let text = match incoming.take() {
            Some(text) if !text.contains(STOP_TOKEN) => text,
            _ => return client.finish("ok", json!({"turns": history.len()})),
        };
        history.push(ChatMessage::new(Role::User, text.clone()));

        let mut messages = vec![system.clone()];
        messages.extend(history.iter().cloned());
        let mut request = LlmRequest::new("", messages.clone());
        request.tools = Some(specs.clone());
        let response = match client.llm(&request) {
            Ok(r) => r,
            Err(e) => return abort(client, e),
        };

        let reply = if response.tool_calls().is_empty() {
            response.message.content
        } else {
            let mut outcomes = Vec::new();
            for call in response.tool_calls() {
                let outcome = if call.name == "policy_question" {
                    let question = call.arguments["question"].as_str().unwrap_or(&text);
                    match client.kb(&kb_id, question, 2) {
                        Ok(hits) => json!({"intent": call.name, "status": "done", "documents": hits}),
                        Err(CallError::Engine(e)) => {
                            json!({"intent": call.name, "status": "failed", "error": e.message})
                        }
                        Err(e) => return abort(client, e),
                    }
                } else {
                    let mut procedure = Procedure {
                        client: &mut client,
                        intent: call.name.clone(),
                        policy: policy.clone(),
                        dc,
                        context: Vec::new(),
                    };
                    let result = if domain == "retail" {
                        retail(&mut procedure, &call.arguments, rt)
                    } else {
                        airline(&mut procedure, &call.arguments)
                    };
                    match result {
                        Ok(outcome) | Err(Halt::Stop(outcome)) => outcome,
                        Err(Halt::Abort(e)) => return abort(client, e),
                    }
                };
                outcomes.push(outcome);
            }
            let mut messages = messages;
            messages.push(ChatMessage::new(
                Role::Tool,
                format!("Outcome: {}\n\n{REPLY_INSTRUCTION}", Value::Array(outcomes)),
            ));
            match client.llm(&LlmRequest::new("", messages)) {
                Ok(r) => r.message.content,
                Err(e) => return abort(client, e),
            }
        };

        history.push(ChatMessage::new(Role::Assistant, reply.clone()));
        if let Err(e) = client.send_user(&reply) {
            return abort(client, e);
        }
        match client.wait_user() {
            Ok(next) => incoming = next,
            Err(e) => return abort(client, e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_splits_out_newest_user_message() {
        let init = json!({"snapshot": [
            {"role": "system", "content": "policy"},
            {"role": "user", "content": "hi"},
            {"role": "assistant", "content": "hello"},
            {"role": "user", "content": "cancel my order"}
        ]});
        let (history, last) = snapshot_messages(&init);
        assert_eq!(last.as_deref(), Some("cancel my order"));
        assert_eq!(history.len(), 2);
        assert_eq!(history[1].role, Role::Assistant);
    }
}
