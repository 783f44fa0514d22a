"""measure2shape: shape estimation from anthropometric measurements"""
