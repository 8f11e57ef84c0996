"""Action/state token grammar, legality automaton and wire framing."""
