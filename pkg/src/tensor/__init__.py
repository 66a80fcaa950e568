"""Dense tensor substrate and container files"""
