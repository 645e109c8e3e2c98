#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfsync/units.hpp"

namespace rfsync {

/// Discrete-event queue ordered by (time, insertion sequence). Handlers may
/// schedule further events, never earlier than the one being dispatched.
class EventQueue {
public:
    using Handler = std::function<void(SimTime)>;

    void schedule(SimTime at, Handler handler) {
        if (dispatching_ && at < now_)
            throw std::logic_error("event scheduled in the past: " + std::to_string(at) + " < "
                                   + std::to_string(now_));
        heap_.push(Entry{at, next_seq_++, std::move(handler)});
    }

    /// Dispatch one event. Returns false when empty.
    bool step() {
        if (heap_.empty()) return false;
        Entry e = heap_.top();
        heap_.pop();
        if (e.time < now_) throw std::logic_error("event queue went back in time");
        now_ = e.time;
        ++dispatched_;
        dispatching_ = true;
        e.handler(e.time);
        dispatching_ = false;
        return true;
    }

    void run() {
        while (step()) {
        }
    }

    /// Dispatch every event with time <= until.
    void run_until(SimTime until) {
        while (!heap_.empty() && heap_.top().time <= until) step();
    }

    SimTime now() const { return now_; }
    bool empty() const { return heap_.empty(); }
    std::size_t pending() const { return heap_.size(); }
    std::uint64_t dispatched() const { return dispatched_; }

private:
    struct Entry {
        SimTime time;
        std::uint64_t seq;
        Handler handler;
    };
    struct Later {
        bool operator()(const Entry& a, const Entry& b) const {
            return a.time != b.time ? a.time > b.time : a.seq > b.seq;
        }
    };

    std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
    std::uint64_t next_seq_ = 0;
    std::uint64_t dispatched_ = 0;
    SimTime now_ = 0;
    bool dispatching_ = false;
};

} // namespace rfsync
