"""Hand-built reasoning chains for the validator acceptance check.

CONFORMING chains use only sequential steps, conditionals, and loops with
typed I/O; VIOLATING chains each smuggle in a forbidden construct.
"""

CONFORMING = [
    """Input: none
Output: none
1. Step: emit a heartbeat record
""",
    """Input: packets: list of int
Output: total: int
1. Step: start the total at zero
2. Loop: for each packet size in packets
    1. Step: add the size to the total
3. Step: return the total
""",
    """Input: rtt: float
Output: verdict: bool
1. Cond: rtt exceeds the alert limit
    Then:
        1. Step: mark the path as congested
    Else:
        1. Step: mark the path as healthy
2. Step: return the mark
""",
    """Input: flows: dict of str to int; cutoff: int
Output: survivors: list of str
1. Step: prepare an empty survivor list
2. Loop: over flows in descending volume order
    1. Cond: the flow volume reaches the cutoff
        Then:
            1. Step: keep the flow id
        Else:
            1. Step: stop scanning
3. Step: return the survivor list
""",
    """Input: window: list of float
Output: smoothed: float
1. Step: sum the window values
2. Step: divide by the window length
3. Step: return the mean
""",
    """Input: links: list of str
Output: up_count: int
1. Step: reset the up counter
2. Loop: for each link in links
    1. Cond: the link reports carrier
        Then:
            1. Step: increment the counter
3. Step: return the counter
""",
    """Input: budget: int; demands: list of int
Output: admitted: list of int
1. Step: sort the demands ascending
2. Loop: while the budget covers the smallest remaining demand
    1. Step: admit the demand and reduce the budget
3. Step: return the admitted demands
""",
    """Input: a: int; b: int
Output: bigger: int
1. Cond: a is at least b
    Then:
        1. Step: pick a
    Else:
        1. Step: pick b
2. Step: return the pick
""",
    """Input: trace: list of float
Output: spikes: int
1. Step: remember the previous sample as the first value
2. Loop: over the remaining samples
    1. Cond: the sample doubles the previous one
        Then:
            1. Step: count a spike
    2. Step: slide the previous sample forward
3. Step: return the spike count
""",
    """Input: table: dict of str to str
Output: none
1. Loop: over the table entries in key order
    1. Step: print the key and value pair
""",
    """Input: target: str; routes: list of str
Output: found: bool
1. Step: assume the target is absent
2. Loop: over the routes in order
    1. Cond: the route matches the target
        Then:
            1. Step: record the hit
3. Step: return the record
""",
    """Input: max_retries: int
Output: attempts: int
1. Step: zero the attempt counter
2. Loop: until the probe succeeds or retries run out
    1. Step: send one probe
    2. Step: increment the attempt counter
3. Step: return the attempt counter
""",
    """Input: bytes_in: int; bytes_out: int
Output: ratio: float
1. Cond: bytes_out is zero
    Then:
        1. Step: return a ratio of zero
    Else:
        1. Step: divide bytes_in by bytes_out
2. Step: return the quotient
""",
    """Input: intervals: list of int
Output: merged: list of int
1. Step: sort the intervals by start
2. Loop: over the sorted intervals
    1. Cond: the interval overlaps the last merged one
        Then:
            1. Step: extend the last merged interval
        Else:
            1. Step: append the interval as new
3. Step: return the merged list
""",
    """Input: seed: int; count: int
Output: sequence: list of int
1. Step: load the seed into the state
2. Loop: count times
    1. Step: advance the state with the mixing rule
    2. Step: append the state to the sequence
3. Step: return the sequence
""",
    """Input: hosts: list of str
Output: reachable: list of str
1. Loop: over the hosts
    1. Cond: the ping answers within the deadline
        Then:
            1. Step: add the host to the reachable set
2. Step: return the reachable set in input order
""",
    """Input: quota: float; usage: list of float
Output: over: bool
1. Step: accumulate the usage values
2. Cond: the accumulated usage exceeds the quota
    Then:
        1. Step: report an overage
    Else:
        1. Step: report headroom
3. Step: return the report
""",
    """Input: depth: int
Output: layers: list of int
1. Step: start with the root layer
2. Loop: for each level up to depth
    1. Step: derive the next layer width from the current one
    2. Step: append the width
3. Step: return the layer widths
""",
    """Input: text: str
Output: tokens: list of str
1. Step: trim surrounding blanks
2. Cond: the trimmed text is empty
    Then:
        1. Step: return an empty token list
    Else:
        1. Step: split on runs of blanks
3. Step: return the pieces
""",
    """Input: samples: list of float; limit: float
Output: clipped: list of float
1. Loop: over the samples
    1. Cond: the sample exceeds the limit
        Then:
            1. Step: append the limit
        Else:
            1. Step: append the sample unchanged
2. Step: return the clipped list
""",
]

VIOLATING = [
    """Input: n: int
Output: total: int
1. Step: recurse on the smaller half and combine the results
""",
    """Input: none
Output: none
1. Step: goto the cleanup label when the socket drops
""",
    """Input: tree: dict of str to str
Output: size: int
1. Step: the walker calls itself on every child node
""",
    """Input: none
Output: none
1. Step: install the handler with setjmp before parsing
""",
    """Input: none
Output: none
1. Step: on overflow longjmp back to the dispatcher
""",
    """Input: frames: list of int
Output: none
1. Loop: over the frames
    1. Step: jump to label done when a marker frame appears
""",
    """Input: queue: list of int
Output: none
1. Step: raise a sentinel exception to exit the scan early
""",
    """Input: depth: int
Output: count: int
1. Step: apply the recursive descent over the subtrees
""",
    """Input: none
Output: none
1. Step: use exception-driven flow to unwind the retries
""",
    """Input: jobs: list of str
Output: none
1. Loop: over the jobs
    1. Step: throw a stop marker to break the outer loop
""",
]
