#include <gtest/gtest.h>

#include "counterpart/bridge_check.hpp"
#include "counterpart/external_agent.hpp"
#include "counterpart/predictor.hpp"
#include "counterpart/text_encoder.hpp"
#include "test_util.hpp"

using namespace counterpart;
using counterpart::testing::fixture_endpoint;
using counterpart::testing::read_file;
using counterpart::testing::scratch_dir;

namespace {

Endpoint fixture(const std::string& mode) { return Endpoint::parse(fixture_endpoint(mode)); }

const CheckResult* find(const std::vector<CheckResult>& rs, const std::string& name) {
    for (const auto& r : rs)
        if (r.name == name) return &r;
    return nullptr;
}

bool all_passed(const std::vector<CheckResult>& rs) {
    return std::all_of(rs.begin(), rs.end(), [](const CheckResult& r) { return r.passed; });
}

/// A peer that saves the one request line it reads and answers with `reply`.
Endpoint recorder(const std::filesystem::path& file, const std::string& reply) {
    return Endpoint::parse("cmd=read -r line; printf '%s\\n' \"$line\" > '" + file.string() + "'; echo '" + reply + "'");
}

}  // namespace

TEST(BridgeCheck, GoodPeersPass) {
    const auto enc = check_encoder(fixture("encoder"));
    EXPECT_EQ(enc.size(), 5u);
    EXPECT_TRUE(all_passed(enc));
    EXPECT_EQ(find(enc, "encoder.determinism")->detail, "bitwise identical");
    EXPECT_EQ(find(enc, "encoder.observer")->detail, "logits are probabilities");
    const auto pred = check_predictor(fixture("predictor-knn"));
    EXPECT_EQ(pred.size(), 3u);
    EXPECT_TRUE(all_passed(pred));
    const auto agent = check_agent(fixture("agent-echo"));
    EXPECT_EQ(agent.size(), 2u);
    EXPECT_TRUE(all_passed(agent));
}

TEST(BridgeCheck, NondeterministicEncoderNamesTheItem) {
    const auto rs = check_encoder(fixture("encoder-nondeterministic"), 1e-9);
    const CheckResult* det = find(rs, "encoder.determinism");
    ASSERT_NE(det, nullptr);
    EXPECT_FALSE(det->passed);
    EXPECT_NE(det->detail.find("batch item 0"), std::string::npos) << det->detail;
}

TEST(BridgeCheck, WrongLengthEncoderFailsShape) {
    const auto rs = check_encoder(fixture("encoder-wrong-length"));
    EXPECT_TRUE(find(rs, "encoder.handshake")->passed);
    EXPECT_FALSE(find(rs, "encoder.shape")->passed);
}

TEST(BridgeCheck, DeadPeerStopsAfterHandshake) {
    const auto rs = check_encoder(fixture("crash"));
    ASSERT_EQ(rs.size(), 1u);
    EXPECT_FALSE(rs[0].passed);
}

TEST(BridgeCheck, BrokenPredictorAndAgentFail) {
    const auto pred = check_predictor(fixture("predictor-short"));
    EXPECT_FALSE(find(pred, "predictor.classification")->passed);
    EXPECT_NE(find(pred, "predictor.classification")->detail.find("predictions for 3 rows"), std::string::npos);
    const auto agent = check_agent(fixture("agent-bad-sum"));
    EXPECT_FALSE(find(agent, "agent.propose")->passed);
    EXPECT_TRUE(find(agent, "agent.respond")->passed);
}

TEST(WireProtocol, EncoderRequestShape) {
    const auto dir = scratch_dir("wire_enc");
    const auto file = dir / "req.json";
    TextEncoder enc(EncoderEndpoint::external(recorder(file, R"({"vectors":[[1,0],[0,1]],"logits":[0.25,0.75]})")));
    const auto e = enc.encode(TextKind::Observer, std::vector<std::string>{"a", "b"});
    const auto req = nlohmann::json::parse(read_file(file));
    EXPECT_EQ(req, (nlohmann::json{{"type", "encode"}, {"kind", "observer"}, {"texts", {"a", "b"}}}));
    EXPECT_EQ(*e.logits, (std::vector<double>{0.25, 0.75}));
    std::filesystem::remove_all(dir);
}

TEST(WireProtocol, PredictorRequestSendsMissingAsNull) {
    const auto dir = scratch_dir("wire_pred");
    const auto file = dir / "req.json";
    TrainSet t{Matrix::from_rows({{1.0, kNaN}, {2.0, 3.0}}), {0.0, 1.0}, TaskKind::Regression};
    const auto p = external_predict(recorder(file, R"({"pred":[0.5]})"), t, Matrix::from_rows({{kNaN, 1.5}}));
    EXPECT_EQ(p, std::vector<double>{0.5});
    const auto req = nlohmann::json::parse(read_file(file));
    EXPECT_EQ(req.at("type"), "fit_predict");
    EXPECT_EQ(req.at("task"), "reg");
    EXPECT_TRUE(req.at("train_X")[0][1].is_null());
    EXPECT_EQ(req.at("train_X")[1], nlohmann::json({2.0, 3.0}));
    EXPECT_EQ(req.at("train_y"), nlohmann::json({0.0, 1.0}));
    EXPECT_TRUE(req.at("test_X")[0][0].is_null());
    std::filesystem::remove_all(dir);
}

TEST(WireProtocol, AgentRequestCarriesViewAndPrivateValue) {
    const auto dir = scratch_dir("wire_agent");
    const auto file = dir / "req.json";
    const auto c = GameConfig::negotiation(Money::whole(10'000), 0.9, 1.2, 10, false, true);
    GameState s = new_game(c, "s", "b", 1);
    s = apply_proposal(s, Price{Money::whole(11'000)}, "list");
    const auto a = external_agent_act(recorder(file, R"({"decision":"outside","message":"no"})"), "b", public_view(s), Turn::Respond, {1.2});
    ASSERT_TRUE(std::holds_alternative<ResponseAction>(a));
    EXPECT_EQ(std::get<ResponseAction>(a).decision, Decision::OutsideOption);
    const auto req = nlohmann::json::parse(read_file(file));
    EXPECT_EQ(req.at("type"), "act");
    EXPECT_EQ(req.at("turn"), "respond");
    EXPECT_EQ(req.at("private"), (nlohmann::json{{"player", 2}, {"side", "buyer"}, {"value", 1.2}}));
    EXPECT_EQ(req.at("view").at("config").at("family"), "negotiation");
    // The opponent's private value never appears in the view.
    EXPECT_EQ(req.at("view").dump().find("0.9"), std::string::npos) << req.at("view").dump();
    std::filesystem::remove_all(dir);
}

TEST(WireProtocol, AgentRepliesAreChecked) {
    const auto c = GameConfig::bargaining(Money::whole(100), 0.9, 0.8, 12, true, false);
    const PublicView v = public_view(new_game(c, "a", "b", 1));
    EXPECT_THROW(decode_agent_reply(nlohmann::json{{"offer", {{"proposer_gain", 60}, {"responder_gain", 30}}}}, v, Turn::Propose), ProtocolError);
    EXPECT_THROW(decode_agent_reply(nlohmann::json{{"decision", "accept"}}, v, Turn::Propose), ProtocolError);
    EXPECT_THROW(decode_agent_reply(nlohmann::json{{"decision", "outside"}}, v, Turn::Respond), ProtocolError);
    EXPECT_THROW(decode_agent_reply(nlohmann::json{{"decision", "accept"}, {"message", "hi"}}, v, Turn::Respond), ProtocolError);
    EXPECT_THROW(decode_agent_reply(nlohmann::json{{"decision", 1}}, v, Turn::Respond), ProtocolError);
    const auto ok = decode_agent_reply(nlohmann::json{{"offer", {{"proposer_gain", 60}, {"responder_gain", 40}}}}, v, Turn::Propose);
    EXPECT_EQ(std::get<ProposalAction>(ok).offer, Offer(Split{Money::whole(60), Money::whole(40)}));
}
