#pragma once

#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>

#include "ftdl/transport.hpp"

namespace ftdl {

/// Shared hub for in-process workers: one mailbox per node, condition-variable
/// signaling, and hard-kill support (permanent mailbox closure). Messages
/// enqueued before a kill stay deliverable; nothing is sent after it.
class InprocNet {
  public:
    explicit InprocNet(const std::vector<NodeId>& ids);
    ~InprocNet();

    Transport& node(NodeId id);
    /// Permanently closes the node's mailbox and wakes all blocked receivers.
    void kill(NodeId id);
    bool closed(NodeId id) const;
    std::vector<NodeId> ids() const;

  private:
    friend class InprocTransport;
    struct Node;
    std::map<NodeId, std::unique_ptr<Node>> nodes_;
    std::vector<std::unique_ptr<Transport>> handles_;
};

}  // namespace ftdl
