#pragma once

// Client side of the agent wire protocol.
//
//   -> {"type":"act","turn":"propose"|"respond","view":{...},"private":{...}}
//   <- {"offer":{...},"message":"..."} | {"decision":"accept"|"reject"|"outside","message":"..."}

#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "counterpart/agents.hpp"
#include "counterpart/errors.hpp"
#include "counterpart/game.hpp"
#include "counterpart/game_io.hpp"
#include "counterpart/line_channel.hpp"

namespace counterpart {

enum class Turn { Propose, Respond };

inline json private_to_json(const PublicView& view, const AgentId& self, const PrivateValue& own) {
    const bool first = view.player_1_id == self;
    if (view.config.family == Family::Bargaining)
        return json{{"player", first ? 1 : 2}, {"delta", own.value}};
    return json{{"player", first ? 1 : 2}, {"side", first ? "seller" : "buyer"}, {"value", own.value}};
}

using AgentAction = std::variant<ProposalAction, ResponseAction>;

/// Decodes and checks a reply. Any shape or rule problem is a ProtocolError.
inline AgentAction decode_agent_reply(const json& reply, const PublicView& view, Turn turn) {
    std::string message;
    if (reply.contains("message")) {
        if (!reply["message"].is_string()) throw ProtocolError("message must be a string");
        message = reply["message"].get<std::string>();
    }
    if (!view.config.messages_allowed && !message.empty())
        throw ProtocolError("illegal move: message sent in a no-message game");
    try {
        if (turn == Turn::Propose) {
            if (!reply.contains("offer")) throw ProtocolError("proposal reply lacks 'offer'");
            Offer offer = offer_from_json(reply["offer"], view.config.family);
            GameConfig rules;
            rules.family = view.config.family;
            rules.money_M = view.config.money_M;
            rules.price_order_S = view.config.price_order_S;
            check_offer(rules, offer);
            return ProposalAction{std::move(offer), std::move(message)};
        }
        if (!reply.contains("decision") || !reply["decision"].is_string())
            throw ProtocolError("response reply lacks 'decision'");
        const Decision d = decision_from_string(reply["decision"].get<std::string>());
        if (d == Decision::OutsideOption && view.config.family == Family::Bargaining)
            throw ProtocolError("illegal move: outside option in bargaining");
        return ResponseAction{d, std::move(message)};
    } catch (const detail::SchemaError& e) {
        throw ProtocolError(std::string("malformed reply: ") + e.what());
    } catch (const RuleViolation& e) {
        throw ProtocolError(std::string("illegal move: ") + e.what());
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed reply: ") + e.what());
    }
}

/// One connection per game; each turn is a single request/response exchange.
class ExternalAgentSession {
public:
    ExternalAgentSession(AgentId self, const Endpoint& endpoint) : self_(std::move(self)), channel_(endpoint) {}

    AgentAction act(const PublicView& view, Turn turn, const PrivateValue& own) {
        const json request{{"type", "act"},
                           {"turn", turn == Turn::Propose ? "propose" : "respond"},
                           {"view", to_json(view)},
                           {"private", private_to_json(view, self_, own)}};
        return decode_agent_reply(channel_.request(request), view, turn);
    }

private:
    AgentId self_;
    LineChannel channel_;
};

/// Single-turn convenience: opens a connection, exchanges one turn, closes.
inline AgentAction external_agent_act(const Endpoint& endpoint, const AgentId& self, const PublicView& view,
                                      Turn turn, const PrivateValue& own) {
    ExternalAgentSession session(self, endpoint);
    return session.act(view, turn, own);
}

}  // namespace counterpart
