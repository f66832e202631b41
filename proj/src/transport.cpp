#include "edl/transport.hpp"

namespace edl {

const char* msg_kind_name(MsgKind k) {
  switch (k) {
    case MsgKind::Register: return "Register";
    case MsgKind::Ready: return "Ready";
    case MsgKind::Ok: return "Ok";
    case MsgKind::TensorReady: return "TensorReady";
    case MsgKind::ReadyToReduce: return "ReadyToReduce";
    case MsgKind::ShardRequest: return "ShardRequest";
    case MsgKind::ShardReply: return "ShardReply";
    case MsgKind::Progress: return "Progress";
    case MsgKind::ScaleCmd: return "ScaleCmd";
    case MsgKind::Retry: return "Retry";
    case MsgKind::Ack: return "Ack";
    case MsgKind::ModelBroadcast: return "ModelBroadcast";
    case MsgKind::Exit: return "Exit";
    case MsgKind::Topology: return "Topology";
    case MsgKind::ReduceChunk: return "ReduceChunk";
    case MsgKind::Handoff: return "Handoff";
    case MsgKind::Recovery: return "Recovery";
    case MsgKind::StopResume: return "StopResume";
  }
  return "?";
}

InProcFabric::InProcFabric(Clock& clock, Options opts) : clock_(clock), opts_(opts) {
  scheduler_ = std::thread([this] { scheduler_loop(); });
}

InProcFabric::~InProcFabric() {
  {
    std::lock_guard lk(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  scheduler_.join();
}

std::shared_ptr<Mailbox> InProcFabric::attach(const std::string& id, int channels,
                                              Mailbox::Router router) {
  auto box = std::make_shared<Mailbox>(channels, std::move(router));
  std::lock_guard lk(mu_);
  boxes_[id] = box;
  return box;
}

void InProcFabric::detach(const std::string& id) {
  std::shared_ptr<Mailbox> box;
  std::lock_guard lk(mu_);
  auto it = boxes_.find(id);
  if (it != boxes_.end()) {
    box = it->second;
    boxes_.erase(it);
  }
  // Messages already scheduled for this endpoint are dropped at delivery.
}

SendStatus InProcFabric::send(const std::string& dst, Envelope env) {
  if (env.payload.size() > opts_.max_payload) return SendStatus::TooLarge;
  std::shared_ptr<Mailbox> box;
  {
    std::unique_lock lk(mu_);
    auto it = boxes_.find(dst);
    if (it == boxes_.end()) return SendStatus::PeerGone;
    auto lit = links_.find({env.sender, dst});
    if (lit != links_.end()) {
      Link& link = lit->second;
      Duration delay = link.profile.fixed_delay;
      if (link.profile.jitter.count() > 0) {
        std::uniform_int_distribution<int64_t> dist(0, link.profile.jitter.count());
        delay += Duration(dist(link.rng));
      }
      TimePoint at = clock_.now() + delay;
      if (at < link.last_delivery) at = link.last_delivery;  // keep per-link FIFO
      link.last_delivery = at;
      link.schedule.push_back(at);
      heap_.push({at, seq_++, dst, std::move(env)});
      lk.unlock();
      cv_.notify_all();
      return SendStatus::Ok;
    }
    box = it->second;
  }
  box->deliver(std::move(env));
  return SendStatus::Ok;
}

SendStatus InProcFabric::inject_latency(const std::string& src, const std::string& dst,
                                        LinkProfile profile) {
  std::lock_guard lk(mu_);
  if (profile.fixed_delay.count() == 0 && profile.jitter.count() == 0) {
    links_.erase({src, dst});
    return SendStatus::Ok;
  }
  Link link;
  link.profile = profile;
  link.rng.seed(profile.seed ^ std::hash<std::string>{}(src + "->" + dst));
  links_[{src, dst}] = std::move(link);
  return SendStatus::Ok;
}

bool InProcFabric::peer_known(const std::string& id) {
  std::lock_guard lk(mu_);
  return boxes_.count(id) > 0;
}

std::vector<TimePoint> InProcFabric::delivery_schedule(const std::string& src,
                                                       const std::string& dst) {
  std::lock_guard lk(mu_);
  auto it = links_.find({src, dst});
  if (it == links_.end()) return {};
  return it->second.schedule;
}

void InProcFabric::scheduler_loop() {
  std::unique_lock lk(mu_);
  for (;;) {
    if (stop_) return;
    if (heap_.empty()) {
      cv_.wait(lk, [&] { return stop_ || !heap_.empty(); });
      continue;
    }
    TimePoint head = heap_.top().at;
    if (clock_.now() < head) {
      TimePoint observed = head;
      clock_.wait_until(cv_, lk, head, [&] {
        return stop_ || heap_.empty() || heap_.top().at < observed;
      });
      continue;
    }
    Pending p = heap_.top();
    heap_.pop();
    auto it = boxes_.find(p.dst);
    std::shared_ptr<Mailbox> box = it == boxes_.end() ? nullptr : it->second;
    lk.unlock();
    if (box) box->deliver(std::move(p.env));
    lk.lock();
  }
}

}  // namespace edl
