#include "ftdl/collective.hpp"

#include <algorithm>

namespace ftdl {

namespace {

constexpr double kHopMs = 0.005;       // modeled cost per protocol message
constexpr double kPerDoubleMs = 2e-6;  // modeled cost per transferred double

std::pair<size_t, size_t> chunk_range(size_t len, uint32_t m, uint32_t c) {
    return {len * c / m, len * (c + 1) / m};
}

uint32_t mod(int64_t v, uint32_t m) {
    int64_t r = v % static_cast<int64_t>(m);
    if (r < 0) r += m;
    return static_cast<uint32_t>(r);
}

}  // namespace

Communicator::Communicator(Transport& transport, std::vector<NodeId> members, RunClock clock,
                           CommConfig cfg, HeartbeatService* heartbeat, FaultInjector* injector)
    : tp_(transport), clock_(clock), cfg_(cfg), hb_(heartbeat), fi_(injector),
      members_(std::move(members)), self_(transport.self()) {
    std::sort(members_.begin(), members_.end());
    auto it = std::find(members_.begin(), members_.end(), self_);
    if (it == members_.end()) throw Error("communicator does not contain this node");
    rank_ = static_cast<uint32_t>(it - members_.begin());
}

MsgPredicate Communicator::discard_pred() const {
    const uint32_t e = epoch_;
    return [e](const WireMessage& m) { return m.epoch < e && m.op != Op::Abort; };
}

void Communicator::send_msg(NodeId to, const WireMessage& msg) {
    tp_.send(to, msg);  // failure handling is receive-driven
}

void Communicator::fault_action(FaultOp op) {
    if (fi_) fi_->on_action(op);
}

void Communicator::revoke_epoch() {
    if (revoke_sent_) return;
    revoke_sent_ = true;
    WireMessage msg;
    msg.op = Op::Revoke;
    msg.epoch = epoch_;
    msg.sender = self_;
    std::vector<NodeId> ids(pending_suspects_.begin(), pending_suspects_.end());
    msg.payload = pack_ids(ids);
    for (NodeId m : members_)
        if (m != self_) send_msg(m, msg);
}

void Communicator::abort_run(const std::string& why) {
    WireMessage msg;
    msg.op = Op::Abort;
    msg.epoch = epoch_;
    msg.sender = self_;
    for (NodeId m : members_)
        if (m != self_) send_msg(m, msg);
    throw ProtocolError(why);
}

Communicator::RecvOutcome Communicator::ring_recv(NodeId from, Op op, uint32_t seq,
                                                  uint32_t chunk_tag, double timeout_ms,
                                                  FaultOp fop) {
    fault_action(fop);
    const uint32_t e = epoch_;
    auto match = [&, e](const WireMessage& m) {
        if (m.op == Op::Abort) return true;
        if (m.epoch != e || m.sender != from) return false;
        if (m.op == op && m.seq == seq && m.chunk == chunk_tag) return true;
        if (m.op == Op::Revoke) return true;
        return false;
    };
    const double budget = clock_.real ? timeout_ms : cfg_.safety_timeout_ms;
    const auto overall = RunClock::now() + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                               std::chrono::duration<double, std::milli>(budget));
    for (;;) {
        auto slice = overall;
        if (hb_) {
            const auto hb_check = RunClock::now() + std::chrono::milliseconds(50);
            if (hb_check < slice) slice = hb_check;
        }
        RecvResult r = tp_.recv_match(match, {from}, slice, discard_pred());
        switch (r.status) {
            case RecvStatus::Msg:
                if (r.msg.op == Op::Abort)
                    throw ProtocolError("run aborted by node " + std::to_string(r.msg.sender));
                if (r.msg.op == Op::Revoke) {
                    auto ids = unpack_ids(r.msg);
                    return {RecvOutcome::Kind::Revoked, std::move(r.msg),
                            std::set<NodeId>(ids.begin(), ids.end())};
                }
                return {RecvOutcome::Kind::Data, std::move(r.msg), {}};
            case RecvStatus::SenderClosed:
                return {RecvOutcome::Kind::Closed, {}, {}};
            case RecvStatus::Timeout:
                if (hb_ && hb_->suspected(from)) return {RecvOutcome::Kind::Closed, {}, {}};
                if (RunClock::now() >= overall) {
                    if (!clock_.real)
                        throw ProtocolError("deterministic-mode watchdog expired waiting for node " +
                                            std::to_string(from));
                    // timeout escalation: treat the silent peer as failed
                    return {RecvOutcome::Kind::Closed, {}, {}};
                }
                break;
        }
    }
}

double Communicator::modeled_allreduce_ms(size_t len) const {
    const double m = static_cast<double>(members_.size());
    if (m <= 1.0) return kHopMs;
    return (4.0 * m - 2.0) * kHopMs + 2.0 * static_cast<double>(len) * kPerDoubleMs;
}

CollectiveOutcome<std::vector<double>> Communicator::ring_allreduce(const std::vector<double>& data,
                                                                    Op op, uint32_t seq) {
    const FaultOp fop = op == Op::Barrier ? FaultOp::Barrier : FaultOp::Allreduce;
    const uint32_t m = size();
    last_data_complete_ = false;
    held_sum_.clear();

    if (m == 1) {
        last_data_complete_ = true;
        held_sum_ = data;
        return {data, {}};
    }

    const NodeId left = members_[mod(static_cast<int64_t>(rank_) - 1, m)];
    const NodeId right = members_[mod(static_cast<int64_t>(rank_) + 1, m)];
    const size_t len = data.size();
    std::vector<double> buf = data;

    auto send_chunk = [&](uint32_t chunk_idx) {
        fault_action(fop);
        auto [lo, hi] = chunk_range(len, m, chunk_idx);
        WireMessage msg;
        msg.op = op;
        msg.epoch = epoch_;
        msg.sender = self_;
        msg.seq = seq;
        msg.chunk = chunk_idx;
        msg.payload = pack_doubles(buf.data() + lo, hi - lo, len);
        send_msg(right, msg);
    };

    auto recv_chunk = [&](uint32_t chunk_idx, bool add) {
        RecvOutcome r = ring_recv(left, op, seq, chunk_idx, cfg_.peer_timeout_ms, fop);
        if (r.kind == RecvOutcome::Kind::Closed) throw RingAbortEx{{left}};
        if (r.kind == RecvOutcome::Kind::Revoked) {
            auto suspects = r.carried;
            suspects.erase(self_);
            throw RingAbortEx{std::move(suspects)};
        }
        auto [total, values] = unpack_doubles(r.msg);
        auto [lo, hi] = chunk_range(len, m, chunk_idx);
        if (total != len || values.size() != hi - lo)
            abort_run("allreduce length mismatch: local " + std::to_string(len) + " vs peer " +
                      std::to_string(total));
        if (add)
            for (size_t i = lo; i < hi; ++i) buf[i] += values[i - lo];
        else
            for (size_t i = lo; i < hi; ++i) buf[i] = values[i - lo];
    };

    auto seal_send = [&](uint32_t lap) {
        fault_action(fop);
        WireMessage msg;
        msg.op = Op::Seal;
        msg.epoch = epoch_;
        msg.sender = self_;
        msg.seq = seq;
        msg.chunk = lap;
        send_msg(right, msg);
    };
    auto seal_recv = [&](uint32_t lap) {
        RecvOutcome r = ring_recv(left, Op::Seal, seq, lap, cfg_.peer_timeout_ms, fop);
        if (r.kind == RecvOutcome::Kind::Closed) throw RingAbortEx{{left}};
        if (r.kind == RecvOutcome::Kind::Revoked) {
            auto suspects = r.carried;
            suspects.erase(self_);
            throw RingAbortEx{std::move(suspects)};
        }
    };

    try {
        // reduce-scatter: after m-1 steps this rank owns the full sum of
        // chunk (rank+1) mod m
        for (uint32_t s = 0; s + 1 < m; ++s) {
            send_chunk(mod(static_cast<int64_t>(rank_) - s, m));
            recv_chunk(mod(static_cast<int64_t>(rank_) - s - 1, m), /*add=*/true);
        }
        // allgather: circulate completed chunks
        for (uint32_t s = 0; s + 1 < m; ++s) {
            send_chunk(mod(static_cast<int64_t>(rank_) + 1 - s, m));
            recv_chunk(mod(static_cast<int64_t>(rank_) - s, m), /*add=*/false);
        }
        last_data_complete_ = true;
        held_sum_ = buf;

        // completion wave: two laps around the ring, initiated by rank 0.
        // Receiving lap 2 proves every member finished the data phase.
        if (rank_ == 0) {
            seal_send(1);
            seal_recv(1);
            seal_send(2);
            seal_recv(2);
        } else {
            seal_recv(1);
            seal_send(1);
            seal_recv(2);
            seal_send(2);
        }
        return {std::move(buf), {}};
    } catch (RingAbortEx& ex) {
        if (ex.suspects.empty()) ex.suspects.insert(left);  // conservative
        pending_suspects_.insert(ex.suspects.begin(), ex.suspects.end());
        state_ = State::Revoked;
        revoke_epoch();
        CollectiveOutcome<std::vector<double>> out;
        out.suspected = pending_suspects_;
        return out;
    }
}

CollectiveOutcome<std::vector<double>> Communicator::allreduce_sum(const std::vector<double>& data) {
    const auto t0 = RunClock::now();
    if (state_ != State::Healthy) {
        CollectiveOutcome<std::vector<double>> out;
        out.suspected = pending_suspects_;
        return out;
    }
    auto out = ring_allreduce(data, Op::AllreduceData, seq_);
    ++seq_;
    if (on_return) on_return(Op::AllreduceData, RunClock::ms_since(t0), out.ok());
    return out;
}

CollectiveOutcome<bool> Communicator::barrier() {
    const auto t0 = RunClock::now();
    if (state_ != State::Healthy) {
        CollectiveOutcome<bool> out;
        out.suspected = pending_suspects_;
        return out;
    }
    auto r = ring_allreduce(std::vector<double>{0.0}, Op::Barrier, seq_);
    ++seq_;
    if (on_return) on_return(Op::Barrier, RunClock::ms_since(t0), r.ok());
    CollectiveOutcome<bool> out;
    if (r.ok()) out.value = true;
    else out.suspected = r.suspected;
    return out;
}

CollectiveOutcome<std::vector<double>> Communicator::broadcast(NodeId root,
                                                               const std::vector<double>& data) {
    const auto t0 = RunClock::now();
    CollectiveOutcome<std::vector<double>> out;
    if (state_ != State::Healthy) {
        out.suspected = pending_suspects_;
        return out;
    }
    const uint32_t m = size();
    auto rit = std::find(members_.begin(), members_.end(), root);
    if (rit == members_.end()) throw Error("broadcast root is not a member");
    const uint32_t root_rank = static_cast<uint32_t>(rit - members_.begin());
    const uint32_t seq = seq_++;
    if (m == 1) {
        out.value = data;
        if (on_return) on_return(Op::Bcast, RunClock::ms_since(t0), true);
        return out;
    }
    // chain in rank order starting at the root
    const uint32_t pos = mod(static_cast<int64_t>(rank_) - root_rank, m);
    std::vector<double> buf;
    try {
        if (pos == 0) {
            buf = data;
        } else {
            const NodeId prev = members_[mod(static_cast<int64_t>(rank_) - 1, m)];
            RecvOutcome r = ring_recv(prev, Op::Bcast, seq, 0, cfg_.peer_timeout_ms, FaultOp::Bcast);
            if (r.kind == RecvOutcome::Kind::Closed) throw RingAbortEx{{prev}};
            if (r.kind == RecvOutcome::Kind::Revoked) {
                auto s = r.carried;
                s.erase(self_);
                throw RingAbortEx{std::move(s)};
            }
            auto [total, values] = unpack_doubles(r.msg);
            (void)total;
            buf = std::move(values);
        }
        if (pos + 1 < m) {
            fault_action(FaultOp::Bcast);
            WireMessage msg;
            msg.op = Op::Bcast;
            msg.epoch = epoch_;
            msg.sender = self_;
            msg.seq = seq;
            msg.chunk = 0;
            msg.payload = pack_doubles(buf.data(), buf.size(), buf.size());
            send_msg(members_[mod(static_cast<int64_t>(rank_) + 1, m)], msg);
        }
        out.value = std::move(buf);
        if (on_return) on_return(Op::Bcast, RunClock::ms_since(t0), true);
        return out;
    } catch (RingAbortEx& ex) {
        pending_suspects_.insert(ex.suspects.begin(), ex.suspects.end());
        state_ = State::Revoked;
        revoke_epoch();
        out.suspected = pending_suspects_;
        if (on_return) on_return(Op::Bcast, RunClock::ms_since(t0), false);
        return out;
    }
}

void Communicator::adopt_commit(const ShrinkCommitBody& body) {
    // echo once so stragglers still blocked in the old epoch always see it
    WireMessage echo;
    echo.op = Op::ShrinkCommit;
    echo.epoch = epoch_;
    echo.sender = self_;
    echo.payload = pack_shrink_commit(body);
    for (NodeId mbr : body.members)
        if (mbr != self_) send_msg(mbr, echo);

    const bool evicted =
        std::find(body.members.begin(), body.members.end(), self_) == body.members.end();
    if (evicted) {
        tp_.close_self();
        throw EvictedError("node " + std::to_string(self_) + " removed from membership at epoch " +
                           std::to_string(body.new_epoch));
    }
    epoch_ = body.new_epoch;
    members_ = body.members;
    std::sort(members_.begin(), members_.end());
    rank_ = static_cast<uint32_t>(
        std::find(members_.begin(), members_.end(), self_) - members_.begin());
    state_ = State::Healthy;
    pending_suspects_.clear();
    revoke_sent_ = false;
}

Communicator::ShrinkInfo Communicator::shrink(std::set<NodeId> suspects, uint32_t ctx_seq,
                                              bool data_complete) {
    suspects.insert(pending_suspects_.begin(), pending_suspects_.end());
    suspects.erase(self_);
    if (size() == 1 && !suspects.empty())
        throw UnrecoverableError("sole member asked to remove itself");

    state_ = State::Revoked;
    revoke_epoch();

    const uint32_t e = epoch_;
    const uint32_t m = size();
    ShrinkInfo info;
    std::set<NodeId> dead = suspects;
    std::map<NodeId, ShrinkReportBody> reports;
    ShrinkReportBody own;
    own.suspects.assign(suspects.begin(), suspects.end());
    own.ctx_seq = ctx_seq;
    own.data_complete = data_complete ? 1 : 0;

    auto commit_match = [e](const WireMessage& msg) {
        return msg.op == Op::ShrinkCommit && msg.epoch == e;
    };
    auto collect_match = [e](const WireMessage& msg) {
        return (msg.op == Op::ShrinkReport || msg.op == Op::ShrinkCommit) && msg.epoch == e;
    };

    for (uint32_t round = 0;; ++round) {
        if (round > m + 2) throw ProtocolError("shrink did not converge");
        info.rounds = round + 1;
        info.modeled_ms += 3.0 * static_cast<double>(m) * kHopMs;

        NodeId coordinator = self_;
        for (NodeId mbr : members_)
            if (!dead.count(mbr)) {
                coordinator = mbr;
                break;
            }

        if (coordinator != self_) {
            fault_action(FaultOp::Shrink);
            WireMessage rep;
            rep.op = Op::ShrinkReport;
            rep.epoch = e;
            rep.sender = self_;
            own.suspects.assign(dead.begin(), dead.end());
            rep.payload = pack_shrink_report(own);
            if (tp_.send(coordinator, rep) != SendStatus::Ok) {
                dead.insert(coordinator);
                continue;  // next round, next coordinator
            }
            // wait for a commit; a dead coordinator restarts the round
            for (;;) {
                fault_action(FaultOp::Shrink);
                const double budget = clock_.real ? cfg_.shrink_timeout_ms : cfg_.safety_timeout_ms;
                const auto deadline =
                    RunClock::now() + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                          std::chrono::duration<double, std::milli>(budget));
                RecvResult r = tp_.recv_match(commit_match, {coordinator}, deadline, discard_pred());
                if (r.status == RecvStatus::Msg) {
                    auto body = unpack_shrink_commit(r.msg);
                    adopt_commit(body);
                    for (const auto& [vseq, valid] : body.verdicts)
                        if (vseq == ctx_seq) info.reduce_valid = valid != 0;
                    return info;
                }
                if (r.status == RecvStatus::SenderClosed) {
                    dead.insert(coordinator);
                    break;  // restart round with the next-lowest live id
                }
                if (hb_ && hb_->suspected(coordinator)) {
                    dead.insert(coordinator);
                    break;
                }
                if (clock_.real) {
                    dead.insert(coordinator);  // timeout escalation
                    break;
                }
                throw ProtocolError("deterministic-mode watchdog expired in shrink");
            }
            continue;
        }

        // coordinator: collect a report from every member not known dead
        reports[self_] = own;
        for (;;) {
            std::vector<NodeId> missing;
            for (NodeId mbr : members_)
                if (!dead.count(mbr) && !reports.count(mbr)) missing.push_back(mbr);
            if (missing.empty()) break;
            fault_action(FaultOp::Shrink);
            const double budget = clock_.real ? cfg_.shrink_timeout_ms : cfg_.safety_timeout_ms;
            const auto deadline =
                RunClock::now() + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                      std::chrono::duration<double, std::milli>(budget));
            RecvResult r = tp_.recv_match(collect_match, missing, deadline, discard_pred());
            if (r.status == RecvStatus::Msg) {
                if (r.msg.op == Op::ShrinkCommit) {
                    // a parallel round won; adopt its view
                    auto body = unpack_shrink_commit(r.msg);
                    adopt_commit(body);
                    for (const auto& [vseq, valid] : body.verdicts)
                        if (vseq == ctx_seq) info.reduce_valid = valid != 0;
                    return info;
                }
                auto body = unpack_shrink_report(r.msg);
                reports[r.msg.sender] = body;
                for (NodeId s : body.suspects)
                    if (s != self_) dead.insert(s);
            } else if (r.status == RecvStatus::SenderClosed) {
                for (NodeId mbr : missing) dead.insert(mbr);
            } else {
                bool escalated = false;
                if (hb_) {
                    for (NodeId mbr : missing)
                        if (hb_->suspected(mbr)) {
                            dead.insert(mbr);
                            escalated = true;
                        }
                }
                if (!escalated) {
                    if (!clock_.real)
                        throw ProtocolError("deterministic-mode watchdog expired collecting reports");
                    for (NodeId mbr : missing) dead.insert(mbr);  // timeout escalation
                }
            }
        }

        // decide membership and per-collective verdicts
        ShrinkCommitBody body;
        body.new_epoch = e + 1;
        for (NodeId mbr : members_)
            if (!dead.count(mbr)) body.members.push_back(mbr);
        if (body.members.empty()) throw UnrecoverableError("no survivors remain");
        std::map<uint32_t, uint8_t> verdicts;
        for (const auto& [who, rep] : reports) {
            (void)who;
            if (rep.ctx_seq == UINT32_MAX) continue;
            auto it = verdicts.find(rep.ctx_seq);
            if (it == verdicts.end()) verdicts[rep.ctx_seq] = rep.data_complete;
            else it->second = static_cast<uint8_t>(it->second && rep.data_complete);
        }
        for (const auto& [vseq, valid] : verdicts) body.verdicts.emplace_back(vseq, valid);

        fault_action(FaultOp::Shrink);
        WireMessage commit;
        commit.op = Op::ShrinkCommit;
        commit.epoch = e;
        commit.sender = self_;
        commit.payload = pack_shrink_commit(body);
        for (NodeId mbr : body.members)
            if (mbr != self_) send_msg(mbr, commit);
        adopt_commit(body);
        for (const auto& [vseq, valid] : body.verdicts)
            if (vseq == ctx_seq) info.reduce_valid = valid != 0;
        return info;
    }
}

Communicator::ReduceResult Communicator::allreduce_until_success(const std::vector<double>& data) {
    ReduceResult res;
    if (state_ != State::Healthy) {
        const auto t0 = RunClock::now();
        auto info = shrink(pending_suspects_);
        res.shrink_count++;
        res.shrink_ms += clock_.real ? RunClock::ms_since(t0) : info.modeled_ms;
    }
    const uint32_t seq = seq_;  // retries of this logical collective share one seq
    for (;;) {
        res.modeled_comm_ms += modeled_allreduce_ms(data.size());
        const uint32_t size_at_attempt = size();
        auto out = ring_allreduce(data, Op::AllreduceData, seq);
        if (out.ok()) {
            seq_ = seq + 1;
            res.value = std::move(*out.value);
            res.divisor = size_at_attempt;
            return res;
        }
        const bool held = last_data_complete_;
        const auto t0 = RunClock::now();
        auto info = shrink(out.suspected, seq, held);
        res.shrink_count++;
        res.shrink_ms += clock_.real ? RunClock::ms_since(t0) : info.modeled_ms;
        if (info.reduce_valid && held) {
            seq_ = seq + 1;
            res.value = held_sum_;
            res.divisor = size_at_attempt;
            return res;
        }
    }
}

}  // namespace ftdl
